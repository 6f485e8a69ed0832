//! The heuristic against exhaustive search, and reduction soundness.

use std::collections::BTreeSet;
use std::time::Duration;

use binpack3d_core::datagen::{toy_instance, FeatureFlags, ToySpec};
use binpack3d_core::model::{build_model_with, encode_solution, evaluate, BuildOptions, ConstraintLabel};
use binpack3d_core::solver::{for_each_feasible, solve, Backend, OracleLimits, SolverConfig};
use binpack3d_core::validate::check;
use binpack3d_core::{Instance, Weights};

fn flags(bits: u8) -> FeatureFlags {
    FeatureFlags {
        overweight: bits & 1 != 0,
        positive: bits & 2 != 0,
        incompatible: bits & 4 != 0,
        load_bearing: bits & 8 != 0,
        center_of_mass: bits & 16 != 0,
    }
}

fn oracle_o1(inst: &Instance) -> Option<u32> {
    let config = SolverConfig {
        backend: Backend::Oracle,
        ..SolverConfig::default()
    };
    solve(inst, &config).unwrap().best.solution().map(|s| s.objectives.o1)
}

#[test]
fn heuristic_matches_oracle_bins() {
    let mut seed = 0u64;
    let (mut tried, mut matched) = (0, 0);
    while tried < 50 {
        seed += 1;
        let Ok(inst) = toy_instance(seed, &ToySpec::oracle_scale(flags(seed as u8 % 32))) else {
            continue;
        };
        if inst.item_count() < 2 {
            continue;
        }
        let Some(best) = oracle_o1(&inst) else {
            continue;
        };
        tried += 1;
        let config = SolverConfig {
            time_limit: Duration::from_secs(5),
            stall_limit: Some(300),
            seed,
            ..SolverConfig::default()
        };
        let r = solve(&inst, &config).unwrap();
        if let Some(sol) = r.best.solution() {
            assert!(check(&inst, &sol.placements).unwrap().is_feasible());
            assert!(sol.objectives.o1 >= best, "heuristic beat the oracle on seed {seed}");
            matched += usize::from(sol.objectives.o1 == best);
        }
    }
    assert!(matched >= 45, "matched {matched} of 50");
}

/// Both models accept every feasible packing, agree on a shifted copy of
/// each, and lead to the same best bin count.
#[test]
fn reductions_keep_the_optimum() {
    let mut checked = 0;
    for seed in 0..400u64 {
        // Small enough to list every feasible packing.
        let spec = ToySpec {
            max_items: 3,
            max_bin_volume: 8,
            relpos: true,
            ..ToySpec::oracle_scale(flags(4 | (seed as u8 & 8)))
        };
        let Ok(inst) = toy_instance(seed, &spec) else { continue };
        if inst.bin().count < 2 || inst.favour().is_empty() && inst.effective_avoid().is_empty() {
            continue;
        }
        let on = build_model_with(&inst, BuildOptions { weights: Weights::default(), reductions: true }).unwrap();
        let off = build_model_with(&inst, BuildOptions { weights: Weights::default(), reductions: false }).unwrap();
        let verdict = |model, placements: &[_]| match encode_solution(model, &inst, placements) {
            Ok(a) => evaluate(model, &a).unwrap().is_feasible(),
            Err(_) => false,
        };
        let mut best_on = None::<u32>;
        let mut best_off = None::<u32>;
        for_each_feasible(&inst, &OracleLimits::default(), |pl| {
            let bins = pl.iter().map(|p| p.bin).collect::<BTreeSet<_>>().len() as u32;
            let (a, b) = (verdict(&on, pl), verdict(&off, pl));
            assert!(a && b, "feasible packing rejected (seed {seed})");
            best_on = Some(best_on.map_or(bins, |x| x.min(bins)));
            best_off = Some(best_off.map_or(bins, |x| x.min(bins)));
            let mut shifted = pl.to_vec();
            shifted[0].z += 1;
            assert_eq!(verdict(&on, &shifted), verdict(&off, &shifted), "seed {seed}");
        })
        .unwrap();
        assert_eq!(best_on, best_off);
        assert_eq!(best_on, oracle_o1(&inst));
        checked += 1;
        if checked == 25 {
            break;
        }
    }
    assert!(checked >= 20, "only {checked} instances exercised");
}

#[test]
fn eliminated_counts_follow_the_formulas() {
    let mut checked = 0;
    for seed in 0..400u64 {
        let spec = ToySpec {
            relpos: true,
            ..ToySpec::oracle_scale(flags(4 | (seed as u8 & 8)))
        };
        let Ok(inst) = toy_instance(seed, &spec) else { continue };
        let incompatible: BTreeSet<_> = inst.incompatible_item_pairs().into_iter().collect();
        let avoid = inst.effective_avoid();
        let favour = inst.favour();
        let n = inst.bin().count as u64;
        let touches = avoid.iter().any(|(i, k, _)| incompatible.contains(&(*i, *k)))
            || favour.keys().any(|p| incompatible.contains(p));
        if n < 2 || touches {
            continue;
        }
        let (p_minus, p_plus) = (avoid.len() as u64, favour.len() as u64);
        let nu = 6 * n * incompatible.len() as u64;

        let on = build_model_with(&inst, BuildOptions { weights: Weights::default(), reductions: true }).unwrap();
        let off = build_model_with(&inst, BuildOptions { weights: Weights::default(), reductions: false }).unwrap();
        let prov = on.provenance();
        assert_eq!(prov.eliminated_rel_vars as u64, p_minus + 6 * p_plus);
        assert_eq!(
            (prov.dropped_nonoverlap_incompatible + prov.dropped_nonoverlap_relpos) as u64,
            n * (p_minus + 5 * p_plus) + nu
        );
        // The same numbers, read off the two models directly.
        assert_eq!((off.variables().len() - on.variables().len()) as u64, p_minus + 6 * p_plus);
        let nonoverlap = |m: &binpack3d_core::model::QuadraticModel| {
            m.constraints()
                .iter()
                .filter(|c| matches!(c.label, ConstraintLabel::NonOverlap { .. }))
                .count() as u64
        };
        assert_eq!(nonoverlap(&off) - nonoverlap(&on), n * (p_minus + 5 * p_plus) + nu);
        checked += 1;
    }
    assert!(checked >= 20, "only {checked} instances exercised");
}
