//! Flat `key = value` benchmark configuration with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::deformation::HoleMotion;
use crate::error::{Result, RomError};
use crate::fem::poisson::default_eta;
use crate::saddle::SupremizerKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Problem {
    Poisson,
    Stokes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Tpod,
    Ttrb,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub problem: Problem,
    pub method: Method,
    pub order: usize,
    pub cells: [usize; 2],
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub eta: f64,
    pub param_lo: Vec<f64>,
    pub param_hi: Vec<f64>,
    pub mu_ref: Vec<f64>,
    pub hole: HoleMotion,
    pub n_offline: usize,
    pub n_clusters: usize,
    pub n_clusters_hyper: usize,
    pub tolerances: Vec<f64>,
    pub hyper_factor: f64,
    pub kmeans_seed: u64,
    pub svd_seed: u64,
    pub online_seed: u64,
    pub n_online: usize,
    pub halton_skip: usize,
    pub young: f64,
    pub poisson_ratio: f64,
    pub stiffening: f64,
    pub output: PathBuf,
    pub deterministic: bool,
    pub oversample: usize,
    pub power_iters: usize,
    pub supremizer: SupremizerKind,
    pub enrichment: bool,
    pub quad_points: usize,
    pub workers: usize,
}

/// Keys that do not influence the offline model.
const UNHASHED: [&str; 4] = ["output", "n_online", "online_seed", "workers"];

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}

impl Config {
    pub fn poisson_benchmark() -> Self {
        Config {
            problem: Problem::Poisson,
            method: Method::Tpod,
            order: 2,
            cells: [20, 20],
            lower: [-1.0, -1.0],
            upper: [1.0, 1.0],
            eta: default_eta(2),
            param_lo: vec![-0.15, 0.25],
            param_hi: vec![0.35, 0.35],
            mu_ref: vec![0.1, 0.3],
            hole: HoleMotion::DiagonalCenterRadius,
            n_offline: 50,
            n_clusters: 4,
            n_clusters_hyper: 4,
            tolerances: vec![1e-2, 1e-3, 1e-4],
            hyper_factor: 0.01,
            kmeans_seed: 0,
            svd_seed: 0,
            online_seed: 1,
            n_online: 10,
            halton_skip: 20,
            young: 1.0,
            poisson_ratio: 0.3,
            stiffening: 1.0,
            output: PathBuf::from("out/poisson"),
            deterministic: true,
            oversample: 10,
            power_iters: 2,
            supremizer: SupremizerKind::Whitened,
            enrichment: true,
            quad_points: 4,
            workers: 0,
        }
    }

    pub fn stokes_benchmark() -> Self {
        Config {
            problem: Problem::Stokes,
            cells: [16, 16],
            lower: [0.0, 0.0],
            upper: [1.25, 1.25],
            param_lo: vec![0.475, 0.475],
            param_hi: vec![0.775, 0.775],
            mu_ref: vec![0.625, 0.625],
            hole: HoleMotion::Center { radius: 0.25 },
            output: PathBuf::from("out/stokes"),
            ..Self::poisson_benchmark()
        }
    }

    /// Parses a configuration; unspecified keys take the defaults of the
    /// benchmark named by `problem`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| RomError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let k = k.trim().to_string();
            if map.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(RomError::Config(format!("line {}: duplicate key '{k}'", lineno + 1)));
            }
        }
        let mut cfg = match map.get("problem").map(String::as_str) {
            None | Some("poisson") => Self::poisson_benchmark(),
            Some("stokes") => Self::stokes_benchmark(),
            Some(other) => return Err(RomError::Config(format!("unknown problem '{other}'"))),
        };
        for (k, v) in &map {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RomError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets one `key = value` entry without re-validating.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let bad = |what: &str| RomError::Config(format!("invalid value '{v}' for {key}: expected {what}"));
        let float = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("a number"));
        let uint = |s: &str| s.trim().parse::<usize>().map_err(|_| bad("a non-negative integer"));
        let floats = |s: &str| s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad("comma-separated numbers"))).collect::<Result<Vec<f64>>>();
        let boolean = |s: &str| match s {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(bad("true or false")),
        };
        match key {
            "problem" => {}
            "method" => {
                self.method = match v {
                    "tpod" => Method::Tpod,
                    "ttrb" => Method::Ttrb,
                    _ => return Err(bad("tpod or ttrb")),
                }
            }
            "order" => self.order = uint(v)?,
            "cells" => {
                let c: Vec<usize> = v.split(',').map(uint).collect::<Result<_>>()?;
                self.cells = c.try_into().map_err(|_| bad("two cell counts"))?;
            }
            "domain" => {
                let d = floats(v)?;
                if d.len() != 4 {
                    return Err(bad("x0,y0,x1,y1"));
                }
                self.lower = [d[0], d[1]];
                self.upper = [d[2], d[3]];
            }
            "eta" => self.eta = float(v)?,
            "param_lo" => self.param_lo = floats(v)?,
            "param_hi" => self.param_hi = floats(v)?,
            "mu_ref" => self.mu_ref = floats(v)?,
            "hole" => {
                self.hole = if v == "diagonal" {
                    HoleMotion::DiagonalCenterRadius
                } else if let Some(r) = v.strip_prefix("center:") {
                    HoleMotion::Center { radius: float(r)? }
                } else {
                    return Err(bad("diagonal or center:<radius>"));
                }
            }
            "n_offline" => self.n_offline = uint(v)?,
            "n_clusters" => self.n_clusters = uint(v)?,
            "n_clusters_hyper" => self.n_clusters_hyper = uint(v)?,
            "tolerances" => self.tolerances = floats(v)?,
            "hyper_factor" => self.hyper_factor = float(v)?,
            "kmeans_seed" => self.kmeans_seed = uint(v)? as u64,
            "svd_seed" => self.svd_seed = uint(v)? as u64,
            "online_seed" => self.online_seed = uint(v)? as u64,
            "n_online" => self.n_online = uint(v)?,
            "halton_skip" => self.halton_skip = uint(v)?,
            "young" => self.young = float(v)?,
            "poisson_ratio" => self.poisson_ratio = float(v)?,
            "stiffening" => self.stiffening = float(v)?,
            "output" => self.output = PathBuf::from(v),
            "deterministic" => self.deterministic = boolean(v)?,
            "oversample" => self.oversample = uint(v)?,
            "power_iters" => self.power_iters = uint(v)?,
            "supremizer" => self.supremizer = SupremizerKind::parse(v).ok_or_else(|| bad("whitened or classical"))?,
            "enrichment" => self.enrichment = boolean(v)?,
            "quad_points" => self.quad_points = uint(v)?,
            "workers" => self.workers = uint(v)?,
            _ => return Err(RomError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(RomError::Config(m));
        if self.order < 1 {
            return err("order must be at least 1".into());
        }
        if self.problem == Problem::Stokes && self.order != 2 {
            return err("the Stokes benchmark uses order 2 velocities".into());
        }
        if self.method == Method::Ttrb && self.problem != Problem::Poisson {
            return err("method ttrb requires problem poisson".into());
        }
        if self.cells.contains(&0) || !(self.upper[0] > self.lower[0] && self.upper[1] > self.lower[1]) {
            return err("empty grid or domain".into());
        }
        if !(self.eta > 0.0) {
            return err(format!("eta must be positive, got {}", self.eta));
        }
        if self.param_lo.len() != 2 || self.param_hi.len() != 2 || self.mu_ref.len() != 2 {
            return err("parameter box and mu_ref need two entries".into());
        }
        if self.param_lo.iter().zip(&self.param_hi).any(|(a, b)| !(a <= b)) {
            return err("param_lo must not exceed param_hi".into());
        }
        if self.tolerances.is_empty() || self.tolerances.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return err("tolerances must lie in (0, 1)".into());
        }
        if !(self.hyper_factor > 0.0 && self.hyper_factor <= 1.0) {
            return err("hyper_factor must lie in (0, 1]".into());
        }
        if self.n_clusters == 0 || self.n_clusters_hyper == 0 {
            return err("cluster counts must be positive".into());
        }
        if self.n_clusters > self.n_offline || self.n_clusters_hyper > self.n_offline {
            return err(format!("{} / {} clusters exceed {} offline parameters", self.n_clusters, self.n_clusters_hyper, self.n_offline));
        }
        if self.quad_points < 1 {
            return err("quad_points must be positive".into());
        }
        crate::deformation::lame_coefficients(self.young, self.poisson_ratio).map_err(|e| RomError::Config(e.to_string()))?;
        if !(self.stiffening >= 0.0) {
            return Err(RomError::Config(format!("stiffening must be non-negative, got {}", self.stiffening)));
        }
        // the hole must stay strictly inside the box over the whole parameter box
        for c in 0..4 {
            let mu = [if c & 1 == 0 { self.param_lo[0] } else { self.param_hi[0] }, if c & 2 == 0 { self.param_lo[1] } else { self.param_hi[1] }];
            for m in [mu.as_slice(), self.mu_ref.as_slice()] {
                let (ctr, r) = self.hole.center_radius(m);
                let inside = (0..2).all(|k| ctr[k] - r > self.lower[k] && ctr[k] + r < self.upper[k]);
                if !(r > 0.0) || !inside {
                    return err(format!("hole at parameter {m:?} leaves the box"));
                }
            }
        }
        Ok(())
    }

    /// Canonical `key = value` text of every setting.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let hole = match self.hole {
            HoleMotion::DiagonalCenterRadius => "diagonal".to_string(),
            HoleMotion::Center { radius } => format!("center:{radius:e}"),
        };
        vec![
            ("problem", match self.problem { Problem::Poisson => "poisson", Problem::Stokes => "stokes" }.into()),
            ("method", match self.method { Method::Tpod => "tpod", Method::Ttrb => "ttrb" }.into()),
            ("order", self.order.to_string()),
            ("cells", format!("{},{}", self.cells[0], self.cells[1])),
            ("domain", fmt_list(&[self.lower[0], self.lower[1], self.upper[0], self.upper[1]])),
            ("eta", format!("{:e}", self.eta)),
            ("param_lo", fmt_list(&self.param_lo)),
            ("param_hi", fmt_list(&self.param_hi)),
            ("mu_ref", fmt_list(&self.mu_ref)),
            ("hole", hole),
            ("n_offline", self.n_offline.to_string()),
            ("n_clusters", self.n_clusters.to_string()),
            ("n_clusters_hyper", self.n_clusters_hyper.to_string()),
            ("tolerances", fmt_list(&self.tolerances)),
            ("hyper_factor", format!("{:e}", self.hyper_factor)),
            ("kmeans_seed", self.kmeans_seed.to_string()),
            ("svd_seed", self.svd_seed.to_string()),
            ("online_seed", self.online_seed.to_string()),
            ("n_online", self.n_online.to_string()),
            ("halton_skip", self.halton_skip.to_string()),
            ("young", format!("{:e}", self.young)),
            ("poisson_ratio", format!("{:e}", self.poisson_ratio)),
            ("stiffening", format!("{:e}", self.stiffening)),
            ("output", self.output.display().to_string()),
            ("deterministic", self.deterministic.to_string()),
            ("oversample", self.oversample.to_string()),
            ("power_iters", self.power_iters.to_string()),
            ("supremizer", self.supremizer.name().into()),
            ("enrichment", self.enrichment.to_string()),
            ("quad_points", self.quad_points.to_string()),
            ("workers", self.workers.to_string()),
        ]
    }

    /// SHA-256 of the canonical text of every setting that affects the
    /// offline model.
    pub fn model_hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if !UNHASHED.contains(&k) {
                h.update(format!("{k}={v}\n").as_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn svd_options(&self) -> crate::rom::SvdOptions {
        crate::rom::SvdOptions { deterministic: self.deterministic, oversample: self.oversample, power_iters: self.power_iters, seed: self.svd_seed }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_canonical_text() {
        for c in [Config::poisson_benchmark(), Config::stokes_benchmark()] {
            let back = Config::parse(&c.canonical()).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.model_hash(), c.model_hash());
        }
    }

    #[test]
    fn comments_and_overrides() {
        let c = Config::parse("# demo\nproblem = stokes\nn_offline = 12 # fewer\nn_clusters = 2\n").unwrap();
        assert_eq!(c.problem, Problem::Stokes);
        assert_eq!(c.n_offline, 12);
        assert_eq!(c.cells, [16, 16]);
    }

    #[test]
    fn invalid_inputs_are_config_errors() {
        for text in ["n_clusters = 100", "tolerances = 1.5", "method = ttrb\nproblem = stokes", "bogus = 1", "eta = -1", "param_hi = 0.95,0.35"] {
            let e = Config::parse(text).unwrap_err();
            assert!(e.is_config_error(), "{text}: {e}");
        }
    }

    #[test]
    fn output_does_not_change_model_hash() {
        let a = Config::poisson_benchmark();
        let b = Config { output: "elsewhere".into(), n_online: 3, ..a.clone() };
        assert_eq!(a.model_hash(), b.model_hash());
        let c = Config { eta: 41.0, ..a.clone() };
        assert_ne!(a.model_hash(), c.model_hash());
    }
}
