use std::path::Path;

use fusedlasso::simulation::{self, ExperimentSpec};

fn configs() -> Vec<(String, ExperimentSpec)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let spec = ExperimentSpec::from_toml(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, spec)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn bundled_configs_parse() {
    assert!(configs().len() >= 6);
}

#[test]
fn bundled_configs_pass_at_reduced_size() {
    for (name, mut spec) in configs() {
        spec.replications = spec.replications.min(60);
        let r = simulation::run(&spec).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(r.passed(), "{name}: {:#?}", r.checks);
        let dir = tempfile::tempdir().unwrap();
        simulation::write_outputs(&r, dir.path()).unwrap();
        assert!(dir.path().join("summary.json").exists());
    }
}

#[test]
fn elementwise_run_covers_indices() {
    let (_, spec) = configs().into_iter().find(|(n, _)| n == "elementwise_uniform.toml").unwrap();
    let mut spec = spec;
    spec.replications = 40;
    let r = simulation::run(&spec).unwrap();
    assert_eq!(r.growth_l, Some(0.5));
    assert!(!r.indices.is_empty());
    assert!(r.indices.iter().all(|s| s.bound > 0.0 && s.d >= 2048));
    assert!(r.check("elementwise_quantile").unwrap().passed);
}

#[test]
fn per_index_csv_layout() {
    let (_, mut spec) = configs().into_iter().find(|(n, _)| n == "pointwise_mean.toml").unwrap();
    spec.replications = 20;
    let r = simulation::run(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    simulation::write_outputs(&r, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("per_index.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), simulation::csv_header(&spec.hash()).trim_end());
    assert_eq!(lines.next().unwrap(), "i,k,d,median_err,q90_err,B,freq_event");
    assert_eq!(lines.count(), 2048);
}
