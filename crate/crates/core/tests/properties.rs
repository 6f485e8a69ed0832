use binpack3d_core::datagen::{toy_instance, FeatureFlags, ToySpec};
use binpack3d_core::model::{build_model, encode_solution, evaluate, VarTag, ViolationTarget};
use binpack3d_core::solver::{solve, Backend, SolverConfig};
use binpack3d_core::validate::{check, raw_objectives};
use binpack3d_core::{nonredundant_orientations, Instance, Item, Orientation, Rational, RelPos, Weights};
use proptest::prelude::*;

fn small(seed: u64, flags: FeatureFlags) -> Option<Instance> {
    let spec = ToySpec {
        max_items: 6,
        max_bin_volume: 48,
        max_bins: 2,
        flags,
        relpos: false,
    };
    toy_instance(seed, &spec).ok()
}

fn quick(backend: Backend, seed: u64) -> SolverConfig {
    SolverConfig {
        backend,
        iterations: Some(300),
        seed,
        ..SolverConfig::default()
    }
}

proptest! {
    #[test]
    fn orientations_permute_sides(l in 1u32..6, w in 1u32..6, h in 1u32..6) {
        let item = Item { index: 0, length: l, width: w, height: h, weight: 1, category: 0 };
        let mut sorted = [l, w, h];
        sorted.sort();
        for k in Orientation::ALL {
            let mut d = k.apply(item.dims());
            d.sort();
            prop_assert_eq!(d, sorted);
        }
        let kept = nonredundant_orientations(&item);
        let shapes: std::collections::BTreeSet<_> = kept.iter().map(|k| k.apply(item.dims())).collect();
        prop_assert_eq!(shapes.len(), kept.len());
        if item.is_cube() {
            prop_assert!(kept.is_empty());
        } else {
            prop_assert_eq!(shapes.len(), Orientation::ALL.iter().map(|k| k.apply(item.dims())).collect::<std::collections::BTreeSet<_>>().len());
        }
    }

    #[test]
    fn mirrored_packing_stays_feasible(seed in any::<u64>(), lb in any::<bool>()) {
        let flags = FeatureFlags { load_bearing: lb, ..FeatureFlags::default() };
        let Some(inst) = small(seed, flags) else { return Err(TestCaseError::reject("draw")) };
        let Some(sol) = solve(&inst, &quick(Backend::Heuristic, seed)).unwrap().best.solution().cloned() else {
            return Err(TestCaseError::reject("infeasible"));
        };
        let length = inst.bin().length;
        let mirrored: Vec<_> = sol
            .placements
            .iter()
            .map(|p| {
                let dx = p.orientation.apply(inst.items()[p.item].dims())[0];
                let base = (p.bin - 1) * length;
                let mut q = *p;
                q.x = base + (length - (p.x - base) - dx);
                q
            })
            .collect();
        prop_assert!(check(&inst, &mirrored).unwrap().is_feasible());
        prop_assert_eq!(raw_objectives(&inst, &mirrored).unwrap().o2, sol.objectives.o2);
    }

    #[test]
    fn iteration_mode_repeats_exactly(seed in any::<u64>(), annealer in any::<bool>()) {
        let Some(inst) = small(seed, FeatureFlags::default()) else { return Err(TestCaseError::reject("draw")) };
        let backend = if annealer { Backend::Annealer } else { Backend::Heuristic };
        let a = solve(&inst, &quick(backend, seed)).unwrap();
        let b = solve(&inst, &quick(backend, seed)).unwrap();
        prop_assert_eq!(a.best, b.best);
        prop_assert_eq!(a.energy, b.energy);
    }

    #[test]
    fn deviation_variables_sit_at_their_minimum(seed in any::<u64>()) {
        let flags = FeatureFlags { center_of_mass: true, ..FeatureFlags::default() };
        let Some(inst) = small(seed, flags) else { return Err(TestCaseError::reject("draw")) };
        let Some(sol) = solve(&inst, &quick(Backend::Heuristic, seed)).unwrap().best.solution().cloned() else {
            return Err(TestCaseError::reject("infeasible"));
        };
        let model = build_model(&inst, Weights::default()).unwrap();
        let mut a = encode_solution(&model, &inst, &sol.placements).unwrap();
        let ev = evaluate(&model, &a).unwrap();
        prop_assert!(ev.is_feasible());
        prop_assert_eq!(Some(ev.balance.unwrap()), sol.objectives.o3);
        // Any smaller deviation breaks a balance row; larger ones only cost more.
        let id = model.lookup(VarTag::DevX(0)).unwrap();
        let v = a.get(id).unwrap();
        if v > Rational::from_integer(0) {
            a.set(id, v - Rational::new(1, 4).min(v));
            let ev = evaluate(&model, &a).unwrap();
            prop_assert!(ev.violations.iter().any(|x| matches!(x.target, ViolationTarget::Constraint(_))));
        }
    }
}

#[test]
fn relative_positions_mirror() {
    for q in RelPos::ALL {
        assert_eq!(q.mirror().mirror(), q);
        assert_eq!(q.mirror().axis(), q.axis());
        assert_ne!(q.mirror().i_first(), q.i_first());
        assert_eq!(RelPos::from_index(q.index()).unwrap(), q);
    }
}
