//! End-to-end pipeline: a sampling run and a marginal run through the
//! experiment layer, compared with the same machinery the CLI exposes.

use pensemble::experiment::{compare_report, parse_config, run_experiment};

#[test]
fn sampled_histogram_matches_marginal_through_the_full_pipeline() {
    let sample_config = parse_config(
        r#"
[experiment]
kind = "sample"

[model]
kind = "degenerate-spin-bath"
hbar_omega0 = 0.30
lambda = 1e-6
d = 3
e0 = 0.0

[thermal]
k_b_t = 0.45

[chain]
samples = 120000
burn_in = 12000
seed = 314159
chains = 2
bins = 40
"#,
    )
    .unwrap();
    let marginal_config = parse_config(
        r#"
[experiment]
kind = "marginal"

[model]
kind = "degenerate-spin-bath"
hbar_omega0 = 0.30
lambda = 1e-6
d = 3
e0 = 0.0

[thermal]
k_b_t = 0.45

[chain]
samples = 1
seed = 0
bins = 40
"#,
    )
    .unwrap();

    let base = std::env::temp_dir().join("pensemble-pipeline-test");
    let _ = std::fs::remove_dir_all(&base);
    let sample_dir = base.join("sample");
    let marginal_dir = base.join("marginal");
    run_experiment(&sample_config, &sample_dir).unwrap();
    run_experiment(&marginal_config, &marginal_dir).unwrap();

    let report = compare_report(
        &sample_dir.join("data.csv"),
        &marginal_dir.join("data.csv"),
        0.05,
    )
    .unwrap();
    assert!(
        report.pass,
        "pipeline TV = {:.4} exceeded the 0.05 threshold",
        report.tv_distance
    );
    assert!(report.tv_distance < 0.05);
    assert!((report.variance_ratio - 1.0).abs() < 0.15);
    let _ = std::fs::remove_dir_all(&base);
}
