use std::path::Path;

use hyperrole::roleclf::{metrics_from_confusion, metrics_from_predictions, ConfusionMatrix};
use hyperrole::PipelineConfig;
use proptest::prelude::*;

#[test]
fn two_class_confusion_example() {
    let cm = ConfusionMatrix {
        counts: vec![vec![1, 1], vec![0, 2]],
    };
    let m = metrics_from_confusion(&cm).unwrap();
    // F1 of 2/3 and 4/5
    assert_eq!(m.macro_avg.f1, (2.0 / 3.0 + 0.8) / 2.0);
    assert!((m.macro_avg.f1 - 0.733_333).abs() < 1e-6);
    assert_eq!(m.accuracy, 0.75);
}

proptest! {
    #[test]
    fn macro_average_is_the_per_class_mean(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60)
    ) {
        let (truth, pred): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let m = metrics_from_predictions(&truth, &pred, 4).unwrap();
        let present: Vec<_> = m.per_class.iter().filter(|c| c.support > 0).collect();
        let recomputed = present.iter().map(|c| c.f1).sum::<f64>() / present.len() as f64;
        prop_assert_eq!(m.macro_avg.f1.to_bits(), recomputed.to_bits());
        for c in &m.per_class {
            let tp = truth.iter().zip(&pred).filter(|(t, p)| **t == c.class && **p == c.class).count();
            let support = truth.iter().filter(|&&t| t == c.class).count();
            prop_assert_eq!(c.support, support);
            if support > 0 {
                prop_assert_eq!(c.recall, tp as f64 / support as f64);
            }
        }
    }
}

#[test]
fn example_config_spells_out_the_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/example.toml");
    let parsed = PipelineConfig::load(&path).unwrap();
    assert_eq!(parsed, PipelineConfig::default());
    parsed.resolved().unwrap();
}
