use crate::mixture::{Arm, ArmRegistry};

/// Instance counts of the TÜLU-v2 mixture, science bundle excluded.
pub const TULU_V2_COUNTS: [(&str, u64); 10] = [
    ("FLAN", 50_000),
    ("FLAN-CoT", 50_000),
    ("Open Assistant 1", 7_000),
    ("ShareGPT", 114_000),
    ("GPT4-Alpaca", 20_000),
    ("Code Alpaca", 20_000),
    ("LIMA", 1_000),
    ("WizardLM", 30_000),
    ("Open-Orca", 30_000),
    ("Hardcoded", 140),
];

/// Total size of the science bundle and its constituents.
pub const TULU_SCIENCE_BUNDLE: (u64, [&str; 6]) = (
    7_000,
    [
        "Evidence Inference",
        "Qasper",
        "SciERC-NER",
        "SciERC-RE",
        "SciFact",
        "SciTLDR",
    ],
);

/// The 16-arm TÜLU-v2 registry. The 7K science bundle is split evenly over
/// its six constituents, with the remainder going to the first.
pub fn make_tulu_registry() -> ArmRegistry {
    let (total, names) = TULU_SCIENCE_BUNDLE;
    let each = total / names.len() as u64;
    let remainder = total - each * names.len() as u64;
    let arms = TULU_V2_COUNTS
        .iter()
        .map(|&(name, count)| Arm::new(name, count))
        .chain(
            names
                .iter()
                .enumerate()
                .map(|(i, &name)| Arm::new(name, if i == 0 { each + remainder } else { each })),
        )
        .collect();
    ArmRegistry::proportional(arms).expect("builtin registry is valid")
}

/// The 11-arm variant with the science bundle as a single arm.
pub fn make_tulu_registry_merged() -> ArmRegistry {
    let arms = TULU_V2_COUNTS
        .iter()
        .map(|&(name, count)| Arm::new(name, count))
        .chain(std::iter::once(Arm::new("Science", TULU_SCIENCE_BUNDLE.0)))
        .collect();
    ArmRegistry::proportional(arms).expect("builtin registry is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_arms_with_reference_counts() {
        let r = make_tulu_registry();
        assert_eq!(r.len(), 16);
        let share_gpt = r.index_of("ShareGPT").unwrap();
        assert_eq!(r.arm(share_gpt).instance_count, 114_000);
        assert_eq!(r.arm(r.index_of("Hardcoded").unwrap()).instance_count, 140);
        assert_eq!(r.arm(r.index_of("LIMA").unwrap()).instance_count, 1_000);
        assert_eq!(r.total_instances(), 329_140);
        let science: u64 = r.arms()[10..].iter().map(|a| a.instance_count).sum();
        assert_eq!(science, 7_000);
        assert_eq!(r.arm(10).instance_count, 1_170);
        assert!(r.arms()[11..].iter().all(|a| a.instance_count == 1_166));
    }

    #[test]
    fn prior_is_normalized_counts() {
        let r = make_tulu_registry();
        assert!((r.prior().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let total: u64 = r.instance_counts().iter().sum();
        let k = r.index_of("ShareGPT").unwrap();
        assert_eq!(r.prior()[k], 114_000.0 / total as f64);
        assert!((r.prior()[k] - 114_000.0 / 329_140.0).abs() < 1e-15);
    }

    #[test]
    fn merged_variant() {
        let r = make_tulu_registry_merged();
        assert_eq!(r.len(), 11);
        assert_eq!(r.total_instances(), 329_140);
        assert_eq!(r.arm(10).instance_count, 7_000);
    }
}
