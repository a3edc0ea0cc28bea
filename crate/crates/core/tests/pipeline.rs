use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use romcut::pipeline::{halton, run_offline, run_online, training_parameters, uniform, Config};
use romcut::RomError;

const SMALL: &str = "\
problem = poisson
cells = 8,8
n_offline = 6
n_clusters = 2
n_clusters_hyper = 2
tolerances = 1e-2
n_online = 2
";

fn small(out: &Path) -> Config {
    let mut cfg = Config::parse(SMALL).unwrap();
    cfg.output = out.to_path_buf();
    cfg
}

#[test]
fn first_halton_point_is_the_midpoint() {
    let p = halton(1, &[2.0], &[4.0], 0).unwrap();
    assert_eq!(p, vec![vec![3.0]]);
    let q = halton(3, &[0.0, 0.0], &[1.0, 1.0], 0).unwrap();
    assert_eq!(q[1], vec![0.25, 2.0 / 3.0]);
    assert_eq!(q[2], vec![0.75, 1.0 / 9.0]);
    assert!(halton(1, &[0.0; 7], &[1.0; 7], 0).is_err());
}

#[test]
fn samples_stay_in_the_box_and_repeat() {
    let (lo, hi) = ([-0.15, 0.25], [0.35, 0.35]);
    let a = halton(200, &lo, &hi, 20).unwrap();
    assert_eq!(a, halton(200, &lo, &hi, 20).unwrap());
    let b = uniform(200, &lo, &hi, 3);
    assert_eq!(b, uniform(200, &lo, &hi, 3));
    for p in a.iter().chain(&b) {
        assert!((0..2).all(|k| p[k] >= lo[k] && p[k] <= hi[k]));
    }
}

#[test]
fn config_text_round_trips_and_rejects_bad_input() {
    let cfg = Config::parse(SMALL).unwrap();
    let again = Config::parse(&cfg.canonical()).unwrap();
    assert_eq!(cfg.canonical(), again.canonical());
    assert_eq!(cfg.model_hash(), again.model_hash());
    for bad in ["cells = 8,8\ncells = 4,4", "colour = red", "tolerances = 1.5", "problem = stokes\nmethod = ttrb", "n_offline = 2\nn_clusters = 3", "nonsense"] {
        assert!(matches!(Config::parse(bad), Err(RomError::Config(_))), "{bad}");
    }
    let mut other = cfg.clone();
    other.output = PathBuf::from("elsewhere");
    other.n_online = 99;
    assert_eq!(cfg.model_hash(), other.model_hash());
    other.n_clusters = 1;
    assert_ne!(cfg.model_hash(), other.model_hash());
}

#[test]
fn online_refuses_a_model_from_another_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    run_offline(&cfg).unwrap();
    let mut same = cfg.clone();
    same.n_online = 1;
    let out = run_online(&same, None).unwrap();
    assert_eq!(out.mus.len(), 1);
    let head = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(head.lines().next().unwrap(), "eps,sample,mu_1,mu_2,subspace_cluster,hyper_cluster,rom_dim,error_u");
    let mut changed = cfg.clone();
    changed.kmeans_seed = 7;
    assert!(matches!(run_online(&changed, None), Err(RomError::ConfigMismatch { .. })));
}

#[test]
fn training_parameters_are_recovered_without_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.tolerances = vec![1e-10];
    cfg.n_clusters = 1;
    cfg.n_clusters_hyper = 1;
    run_offline(&cfg).unwrap();
    for mu in training_parameters(&cfg).unwrap().into_iter().take(3) {
        let out = run_online(&cfg, Some(mu.clone())).unwrap();
        let e = out.results[0].1[0].errors[0];
        assert!(e <= 1e-6, "{mu:?}: {e:e}");
    }
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn deterministic_runs_write_identical_models() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_offline(&small(a.path())).unwrap();
    run_offline(&small(b.path())).unwrap();
    for sub in ["model", "snapshots"] {
        let (ta, tb) = (tree(&a.path().join(sub)), tree(&b.path().join(sub)));
        assert!(!ta.is_empty());
        assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
        for (k, v) in &ta {
            assert!(v == &tb[k], "{} differs", k.display());
        }
    }
    assert_eq!(fs::read(a.path().join("bounds.csv")).unwrap(), fs::read(b.path().join("bounds.csv")).unwrap());
}

fn romcut(args: &[&str], cwd: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_romcut")).args(args).current_dir(cwd).output().unwrap().status.code().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, format!("{SMALL}output = out\n")).unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(romcut(&["online", "--config", c], dir.path()), 2);
    assert_eq!(romcut(&["offline", "--config", c], dir.path()), 0);
    assert_eq!(romcut(&["online", "--config", c, "--mu", "0.1,0.3"], dir.path()), 0);
    assert_eq!(romcut(&["report", "--config", c], dir.path()), 0);
    assert_eq!(romcut(&["fom", "--config", c, "--mu", "0.35,0.8"], dir.path()), 3);
    assert_eq!(romcut(&["fom", "--config", c, "--mu", "0.1,zero"], dir.path()), 2);
    assert_eq!(romcut(&["fom", "--config", "missing.cfg"], dir.path()), 2);
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "tolerances = 2\n").unwrap();
    assert_eq!(romcut(&["offline", "--config", bad.to_str().unwrap()], dir.path()), 2);
    assert!(dir.path().join("out").join("report.txt").exists());
}
