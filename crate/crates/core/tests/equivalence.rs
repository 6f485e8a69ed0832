//! The model and the validator must agree on every packing.

use binpack3d_core::datagen::{toy_instance, FeatureFlags, ToySpec};
use binpack3d_core::model::{build_model, encode_solution, evaluate, ModelError};
use binpack3d_core::solver::{solve, SolverConfig};
use binpack3d_core::validate::{check, raw_objectives};
use binpack3d_core::{Instance, Placement, Weights};
use proptest::prelude::*;

fn spec(bits: u8) -> ToySpec {
    ToySpec {
        max_items: 5,
        max_bin_volume: 48,
        max_bins: 3,
        flags: FeatureFlags {
            overweight: bits & 1 != 0,
            positive: bits & 2 != 0,
            incompatible: bits & 4 != 0,
            load_bearing: bits & 8 != 0,
            center_of_mass: bits & 16 != 0,
        },
        relpos: bits & 32 != 0,
    }
}

/// Model verdict and objective terms, or `None` when the packing cannot be
/// encoded at all (bin index out of range).
fn model_view(inst: &Instance, placements: &[Placement]) -> Option<(bool, [String; 3])> {
    let model = build_model(inst, Weights::default()).ok()?;
    match encode_solution(&model, inst, placements) {
        Ok(a) => {
            let ev = evaluate(&model, &a).unwrap();
            Some((ev.is_feasible(), [ev.bins.to_string(), ev.height.to_string(), format!("{:?}", ev.balance)]))
        }
        // Overlap is detected during encoding and is a violation in any case.
        Err(ModelError::Overlap(..)) => Some((false, Default::default())),
        Err(_) => None,
    }
}

fn validator_view(inst: &Instance, placements: &[Placement]) -> (bool, [String; 3]) {
    let ok = check(inst, placements).unwrap().is_feasible();
    let o = raw_objectives(inst, placements).unwrap();
    (ok, [o.o1.to_string(), o.o2.to_string(), format!("{:?}", o.o3)])
}

fn heuristic(inst: &Instance) -> Option<Vec<Placement>> {
    let config = SolverConfig {
        iterations: Some(200),
        ..SolverConfig::default()
    };
    solve(inst, &config).unwrap().best.solution().map(|s| s.placements.clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn feasible_packings_agree(seed in any::<u64>(), bits in 0u8..64) {
        let Ok(inst) = toy_instance(seed, &spec(bits)) else {
            return Err(TestCaseError::reject("generator rejected the draw"));
        };
        let Some(placements) = heuristic(&inst) else {
            return Err(TestCaseError::reject("no feasible packing found"));
        };
        let (ok, terms) = validator_view(&inst, &placements);
        prop_assert!(ok);
        let (model_ok, model_terms) = model_view(&inst, &placements).expect("heuristic output encodes");
        prop_assert!(model_ok);
        prop_assert_eq!(terms, model_terms);
    }

    #[test]
    fn perturbed_packings_agree(seed in any::<u64>(), bits in 0u8..64, which in any::<prop::sample::Index>(), axis in 0usize..4, delta in 1u32..3) {
        let Ok(inst) = toy_instance(seed, &spec(bits)) else {
            return Err(TestCaseError::reject("generator rejected the draw"));
        };
        let Some(mut placements) = heuristic(&inst) else {
            return Err(TestCaseError::reject("no feasible packing found"));
        };
        let length = inst.bin().length;
        let n = inst.bin().count;
        let p = &mut placements[which.index(inst.item_count())];
        match axis {
            0 => p.x += delta,
            1 => p.y += delta,
            2 => p.z += delta,
            _ => {
                // Same local position, next bin.
                let to = p.bin % n + 1;
                p.x = p.x - (p.bin - 1) * length + (to - 1) * length;
                p.bin = to;
            }
        }
        let (ok, terms) = validator_view(&inst, &placements);
        if let Some((model_ok, model_terms)) = model_view(&inst, &placements) {
            prop_assert_eq!(ok, model_ok);
            if model_terms[0].is_empty() {
                prop_assert!(!ok);
            } else {
                prop_assert_eq!(terms, model_terms);
            }
        } else {
            prop_assert!(!ok);
        }
    }
}
