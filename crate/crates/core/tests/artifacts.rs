use std::path::Path;

use mmfld::harness::config::{preset, preset_names, RunConfig};
use mmfld::harness::run::{read_summary, run_experiment, METRICS_FILE, PARTICLES_FILE};
use mmfld::{Error, SamplerKind};

fn quick(name: &str, dir: &Path) -> RunConfig {
    let mut c = preset(name).unwrap();
    c.sampler.desk_particles = Some(400);
    c.sampler.steps = 12;
    c.output.cadence = 5;
    c.output.dir = dir.to_path_buf();
    c
}

fn without_wall_clock(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}

#[test]
fn metrics_csv_matches_golden_header() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&quick("figure1-beta0", dir.path())).unwrap();
    let text = std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    let golden = include_str!("golden/metrics_header_simplex3.csv");
    assert_eq!(text.lines().next().unwrap(), golden.trim_end());
    assert!(!text.contains('\r'));
    let iterations: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(iterations, ["0", "5", "10", "12"]);
    let width = golden.trim_end().split(',').count();
    assert!(text.lines().all(|l| l.split(',').count() == width));
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut summaries = Vec::new();
    let mut csvs = Vec::new();
    for dir in [a.path(), b.path()] {
        let mut c = quick("figure1-beta1e-4", dir);
        c.output.dump_particles = true;
        run_experiment(&c).unwrap();
        csvs.push(without_wall_clock(&std::fs::read_to_string(dir.join(METRICS_FILE)).unwrap()));
        csvs.push(std::fs::read_to_string(dir.join(PARTICLES_FILE)).unwrap().lines().map(String::from).collect());
        let mut s = read_summary(dir).unwrap();
        s.runtime_ms = 0.0;
        s.config.output.dir = Default::default();
        summaries.push(serde_json::to_string(&s).unwrap());
    }
    assert_eq!(csvs[0], csvs[2]);
    assert_eq!(csvs[1], csvs[3]);
    assert_eq!(summaries[0], summaries[1]);
    let particles = &csvs[1];
    assert_eq!(particles[0], "x_0,x_1,x_2");
    assert_eq!(particles.len(), 401);
}

#[test]
fn summary_echoes_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let c = quick("dirichlet", dir.path());
    let s = run_experiment(&c).unwrap();
    assert_eq!(s.config, c);
    assert_eq!(s.status, "ok");
    assert_eq!(s.particles, 400);
    assert!(s.version.starts_with("mmfld "));
    assert_eq!(s.rng_protocol, "chacha8/particle-iteration/v1");
    let cov = &s.final_state.covariance;
    assert_eq!(cov.len(), 9);
    assert_eq!(cov[1], cov[3]);
}

#[test]
fn projected_runs_share_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = quick("figure1-beta0", dir.path());
    c.sampler.kind = SamplerKind::ProjectedMfld;
    let s = run_experiment(&c).unwrap();
    assert_eq!(s.sampler, "projected-mfld");
    assert_eq!(s.total_substeps, 400 * 12);
    assert_eq!(s.total_reflections, 0);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let c = quick("figure1-beta0", &blocker.join("sub"));
    assert!(matches!(run_experiment(&c), Err(Error::Io { .. })));
}

#[test]
fn every_preset_round_trips() {
    for name in preset_names() {
        let c = preset(name).unwrap();
        let text = c.to_toml();
        let again = RunConfig::parse(&text).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_toml(), text);
    }
}

#[test]
fn figure1_presets_carry_the_published_settings() {
    for (name, beta) in [("figure1-beta0", 0.0), ("figure1-beta1e-4", 1e-4)] {
        let mut c = preset(name).unwrap();
        assert_eq!(c.particles(), 10_000);
        c.paper_scale();
        assert_eq!(c.particles(), 50_000);
        assert_eq!((c.sampler.eta, c.sampler.lambda), (3e-3, 0.1));
        let text = c.to_toml();
        assert!(text.contains(&format!("beta = {}", if beta == 0.0 { "0.0".into() } else { beta.to_string() })));
    }
}

#[test]
fn config_errors_are_collected() {
    let text = preset_names()
        .next()
        .and_then(mmfld::harness::config::preset_text)
        .unwrap()
        .replace("eta = 3e-3", "eta = -1.0")
        .replace("lambda = 0.1", "lamda = 0.1");
    let Err(Error::Config(issues)) = RunConfig::parse(&text) else {
        panic!("expected configuration errors");
    };
    let keys: Vec<&str> = issues.iter().map(|i| i.key.as_str()).collect();
    assert!(keys.contains(&"sampler.lamda"), "{keys:?}");
    assert!(issues.iter().any(|i| i.message.contains("\"lambda\"")));
}
