use binpack3d_cli::format::{to_json, Exact, InstanceFile, RunLog, SolutionFile};
use binpack3d_core::datagen::{toy_instance, FeatureFlags, ToySpec};
use binpack3d_core::solver::{solve, SolverConfig};
use binpack3d_core::Rational;
use proptest::prelude::*;

fn spec(bits: u8) -> ToySpec {
    ToySpec {
        max_items: 6,
        max_bin_volume: 64,
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn instances_round_trip(seed in any::<u64>(), bits in 0u8..64) {
        let Ok(inst) = toy_instance(seed, &spec(bits)) else {
            return Err(TestCaseError::reject("generator rejected the draw"));
        };
        let file = InstanceFile::from_instance(&inst);
        let text = to_json(&file);
        let parsed: InstanceFile = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&parsed, &file);
        prop_assert_eq!(parsed.to_instance().unwrap(), inst);
        prop_assert_eq!(to_json(&parsed), text);
    }

    #[test]
    fn solutions_round_trip(seed in any::<u64>(), bits in 0u8..64, elapsed in proptest::option::of(0.0f64..100.0)) {
        let Ok(inst) = toy_instance(seed, &spec(bits)) else {
            return Err(TestCaseError::reject("generator rejected the draw"));
        };
        let config = SolverConfig { iterations: Some(50), seed, ..SolverConfig::default() };
        let result = solve(&inst, &config).unwrap();
        let Some(sol) = result.best.solution() else {
            return Err(TestCaseError::reject("no packing"));
        };
        let mut file = SolutionFile::new(sol, result.energy.unwrap(), "heuristic", seed);
        file.elapsed_s = elapsed;
        file.run_log = Some(RunLog {
            instance: "toy".into(),
            backend: "heuristic".into(),
            time_limit_s: 5.0,
            iterations: Some(50),
            energies: vec![result.energy.map(Exact), None],
        });
        let parsed: SolutionFile = serde_json::from_str(&to_json(&file)).unwrap();
        prop_assert_eq!(&parsed, &file);
        prop_assert_eq!(parsed.placements().unwrap(), sol.placements.clone());
        prop_assert_eq!(parsed.objectives(), sol.objectives.clone());
    }

    #[test]
    fn rationals_round_trip(num in -10_000i128..10_000, den in 1i128..500) {
        let r = Exact(Rational::new(num, den));
        prop_assert_eq!(serde_json::from_str::<Exact>(&serde_json::to_string(&r).unwrap()).unwrap(), r);
    }
}
