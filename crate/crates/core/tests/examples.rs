//! Every example's `run_example` runs to completion.

macro_rules! example_test {
    ($module:ident, $test:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $test() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example_test!(quickstart, quickstart_runs, "quickstart.rs");
example_test!(attention_cost, attention_cost_runs, "attention_cost.rs");
example_test!(
    sampling_and_batching,
    sampling_and_batching_runs,
    "sampling_and_batching.rs"
);
example_test!(baselines, baselines_runs, "baselines.rs");
example_test!(gradient_check, gradient_check_runs, "gradient_check.rs");
example_test!(checkpoints, checkpoints_runs, "checkpoints.rs");
example_test!(
    experiment_manifest,
    experiment_manifest_runs,
    "experiment_manifest.rs"
);
example_test!(
    hyperparameter_search,
    hyperparameter_search_runs,
    "hyperparameter_search.rs"
);
