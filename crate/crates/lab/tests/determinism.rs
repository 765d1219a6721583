use secantlab::config::{Kind, LatticeSpec};
use secantlab::report::{RunReport, REPORT_FILE};
use secantlab::{catalog_config, run, Config, RunOptions};

/// The catalog with a shortened lattice run.
fn quick_catalog() -> Config {
    let mut cfg = catalog_config();
    for sc in &mut cfg.scenarios {
        if sc.kind == Kind::Lattice {
            sc.lattice = Some(LatticeSpec {
                steps: 3000,
                gauge_trials: 50,
                ..LatticeSpec::default()
            });
        }
    }
    cfg
}

/// Report JSON with every `wall_clock_ms` value zeroed.
fn without_clock(text: &str) -> String {
    fn strip(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(map) => {
                for (k, x) in map.iter_mut() {
                    if k == "wall_clock_ms" {
                        *x = 0.into();
                    } else {
                        strip(x);
                    }
                }
            }
            serde_json::Value::Array(xs) => xs.iter_mut().for_each(strip),
            _ => {}
        }
    }
    let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
    strip(&mut v);
    serde_json::to_string_pretty(&v).unwrap()
}

fn run_into(cfg: &Config, workers: usize, seed: Option<u64>) -> (String, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        workers: Some(workers),
        seed,
        out_dir: Some(dir.path().to_path_buf()),
    };
    run(cfg, &opts).unwrap();
    let text = std::fs::read_to_string(dir.path().join(REPORT_FILE)).unwrap();
    (text, dir)
}

#[test]
fn reports_are_identical_across_runs_and_worker_counts() {
    let cfg = quick_catalog();
    let (a, da) = run_into(&cfg, 1, None);
    let (b, db) = run_into(&cfg, 4, None);
    assert_eq!(without_clock(&a), without_clock(&b));
    let rep = RunReport::from_json(&a).unwrap();
    assert_eq!(rep.scenarios.len(), cfg.scenarios.len());
    for sc in &rep.scenarios {
        for f in &sc.artifacts {
            let x = std::fs::read(da.path().join(f)).unwrap();
            let y = std::fs::read(db.path().join(f)).unwrap();
            assert!(x == y, "{f} differs");
        }
    }
}

#[test]
fn every_requested_analysis_appears_once() {
    let cfg = quick_catalog();
    let (text, _dir) = run_into(&cfg, 2, None);
    let rep = RunReport::from_json(&text).unwrap();
    for (sc, want) in rep.scenarios.iter().zip(&cfg.scenarios) {
        assert_eq!(sc.name, want.name);
        let names: Vec<&str> = sc.analyses.iter().map(|a| a.name.as_str()).collect();
        let wanted: Vec<&str> = want.analyses.iter().map(String::as_str).collect();
        assert_eq!(names, wanted);
    }
    // The report survives a JSON round trip unchanged.
    assert_eq!(RunReport::from_json(&rep.to_json()).unwrap(), rep);
}

#[test]
fn run_seed_reaches_scenarios_without_their_own() {
    let mut cfg = quick_catalog();
    cfg.scenarios.retain(|s| s.kind != Kind::Flow);
    for sc in &mut cfg.scenarios {
        sc.seed = None;
    }
    let (a, _da) = run_into(&cfg, 2, Some(1));
    let (b, _db) = run_into(&cfg, 2, Some(2));
    let (ra, rb) = (RunReport::from_json(&a).unwrap(), RunReport::from_json(&b).unwrap());
    assert!(ra.scenarios.iter().all(|s| s.seed == 1));
    let la = ra.scenario("su2_lattice").unwrap().analyses[0].metrics["action_start"];
    let lb = rb.scenario("su2_lattice").unwrap().analyses[0].metrics["action_start"];
    assert_ne!(la, lb);
}
