//! Plain-text run configuration and artifact serialization.
//!
//! Configs are sectioned `key = value` files so that experiment inputs are
//! diffable artifacts. Unknown sections and keys are rejected up front;
//! model parameters are validated before any computation starts.

use crate::energy::{PatternTable, PhiTable, TileEnergyModel};
use crate::geometry::{Configuration, IBox, MarkedPoint, Window};
use crate::peierls::PotentialProfile;
use crate::sampler::{ScanRow, Trace};
use crate::{contours::Contour, Error, Result};
use std::collections::BTreeMap;

const MODEL_KEYS: &[(&str, &[&str])] = &[
    ("surrogate", &["rho", "b0", "table", "penalty", "lo", "hi", "table_seed"]),
    ("knn-strauss", &["k", "r", "a"]),
    ("area-interaction", &["theta", "r1", "r2"]),
    ("diluted-pairwise", &["phi", "r", "r1", "r2"]),
];
const MODEL_COMMON: &[&str] = &["kind", "dim", "delta", "pitch"];
const RUN_KEYS: &[&str] = &[
    "lambda", "beta", "z", "z_grid", "steps", "thin", "replicas", "seed", "sharp", "rank",
    "ladder", "window", "tol", "h", "eps", "big_r", "samples",
];
const OUTPUT_KEYS: &[&str] = &["dir"];

/// A validated sectioned `key = value` configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim().to_string();
                if !matches!(name.as_str(), "model" | "run" | "output") {
                    return Err(Error::invalid(format!("unknown section [{name}]")));
                }
                if sections.contains_key(&name) {
                    return Err(Error::invalid(format!("duplicate section [{name}]")));
                }
                sections.insert(name.clone(), BTreeMap::new());
                current = Some(name);
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::invalid(format!("line {}: expected key = value", ln + 1)));
            };
            let Some(section) = &current else {
                return Err(Error::invalid(format!("line {}: key outside a section", ln + 1)));
            };
            let k = k.trim().to_string();
            let v = v.trim().to_string();
            if sections.get_mut(section).unwrap().insert(k.clone(), v).is_some() {
                return Err(Error::invalid(format!("duplicate key '{k}' in [{section}]")));
            }
        }
        let cfg = RunConfig { sections };
        cfg.validate_keys()?;
        Ok(cfg)
    }

    fn validate_keys(&self) -> Result<()> {
        if let Some(model) = self.sections.get("model") {
            let kind = model
                .get("kind")
                .ok_or_else(|| Error::invalid("[model] requires 'kind'"))?;
            let allowed = MODEL_KEYS
                .iter()
                .find(|(k, _)| k == kind)
                .ok_or_else(|| Error::invalid(format!("unknown model kind '{kind}'")))?
                .1;
            for k in model.keys() {
                if !MODEL_COMMON.contains(&k.as_str()) && !allowed.contains(&k.as_str()) {
                    return Err(Error::invalid(format!(
                        "key '{k}' is not valid for model kind '{kind}'"
                    )));
                }
            }
        }
        if let Some(run) = self.sections.get("run") {
            for k in run.keys() {
                if !RUN_KEYS.contains(&k.as_str()) {
                    return Err(Error::invalid(format!("unknown key '{k}' in [run]")));
                }
            }
        }
        if let Some(out) = self.sections.get("output") {
            for k in out.keys() {
                if !OUTPUT_KEYS.contains(&k.as_str()) {
                    return Err(Error::invalid(format!("unknown key '{k}' in [output]")));
                }
            }
        }
        Ok(())
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section).and_then(|s| s.get(key)).map(String::as_str)
    }

    fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key)
            .ok_or_else(|| Error::invalid(format!("missing key '{key}' in [{section}]")))
    }

    fn num<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T> {
        self.require(section, key)?
            .parse()
            .map_err(|_| Error::invalid(format!("key '{key}' in [{section}]: invalid value")))
    }

    fn num_or<T: std::str::FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::invalid(format!("key '{key}' in [{section}]: invalid value"))),
        }
    }

    fn list(&self, section: &str, key: &str) -> Result<Vec<f64>> {
        self.require(section, key)?
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("key '{key}': invalid list entry '{t}'")))
            })
            .collect()
    }

    pub fn model(&self) -> Result<TileEnergyModel> {
        let kind = self.require("model", "kind")?;
        let dim: usize = self.num_or("model", "dim", if kind == "area-interaction" { 2 } else { 1 })?;
        let delta: f64 = self.num_or("model", "delta", 1.0)?;
        let mut model = match kind {
            "surrogate" => {
                let rho: usize = self.num_or("model", "rho", 1)?;
                let b0: f64 = self.num_or("model", "b0", 1.0)?;
                let table = match self.get("model", "table").unwrap_or("penalized") {
                    "saturated" => PatternTable::saturated(rho, dim, b0)?,
                    "penalized" => {
                        PatternTable::penalized(rho, dim, b0, self.num_or("model", "penalty", 4.0)?)?
                    }
                    "random" => PatternTable::random(
                        rho,
                        dim,
                        b0,
                        self.num_or("model", "lo", -0.5)?,
                        self.num_or("model", "hi", 1.0)?,
                        self.num_or("model", "table_seed", 1)?,
                    )?,
                    other => return Err(Error::invalid(format!("unknown table '{other}'"))),
                };
                TileEnergyModel::surrogate(dim, table, delta)?
            }
            "knn-strauss" => TileEnergyModel::knn_strauss(
                dim,
                self.num("model", "k")?,
                self.num("model", "r")?,
                self.num("model", "a")?,
                delta,
            )?,
            "area-interaction" => TileEnergyModel::area_interaction(
                self.num("model", "theta")?,
                self.num("model", "r1")?,
                self.num("model", "r2")?,
                delta,
            )?,
            "diluted-pairwise" => {
                TileEnergyModel::diluted_pairwise(dim, self.phi_table()?, self.num("model", "r")?, delta)?
            }
            _ => unreachable!("validated"),
        };
        if let Some(p) = self.get("model", "pitch") {
            model.pitch = p
                .parse()
                .map_err(|_| Error::invalid("key 'pitch': invalid value"))?;
        }
        Ok(model)
    }

    /// The tabulated potential referenced by `[model] phi = <path>`.
    pub fn phi_table(&self) -> Result<PhiTable> {
        let path = self.require("model", "phi")?;
        let text = std::fs::read_to_string(path)?;
        PhiTable::new(
            phi_samples_from_csv(&text)?,
            self.num("model", "r1")?,
            self.num("model", "r2")?,
        )
    }

    /// The dilution profile for condition checks.
    pub fn profile(&self) -> Result<PotentialProfile> {
        let dim: usize = self.num_or("model", "dim", 1)?;
        PotentialProfile::new(self.phi_table()?, self.num("model", "r")?, dim)
    }

    pub fn lambda(&self) -> Result<IBox> {
        let kind = self.get("model", "kind").unwrap_or("surrogate");
        let dim: usize = self.num_or("model", "dim", if kind == "area-interaction" { 2 } else { 1 })?;
        IBox::cube(0, self.num("run", "lambda")?, dim)
    }

    pub fn beta(&self) -> Result<f64> {
        self.num_or("run", "beta", 0.0)
    }

    pub fn z(&self) -> Result<f64> {
        self.num("run", "z")
    }

    pub fn z_grid(&self) -> Result<Vec<f64>> {
        let grid = self.list("run", "z_grid")?;
        if grid.is_empty() || grid.iter().any(|z| !(*z > 0.0)) {
            return Err(Error::invalid("z_grid must be a nonempty list of positive activities"));
        }
        Ok(grid)
    }

    pub fn steps(&self) -> Result<u64> {
        self.num_or("run", "steps", 100_000)
    }

    pub fn thin(&self) -> Result<u64> {
        self.num_or("run", "thin", 10)
    }

    pub fn replicas(&self) -> Result<usize> {
        self.num_or("run", "replicas", 1)
    }

    pub fn seed(&self) -> Result<u64> {
        self.num_or("run", "seed", 1)
    }

    pub fn sharp(&self) -> Result<u8> {
        let s: u8 = self.num_or("run", "sharp", 0)?;
        if s > 1 {
            return Err(Error::invalid("sharp must be 0 or 1"));
        }
        Ok(s)
    }

    pub fn rank(&self) -> Result<usize> {
        self.num_or("run", "rank", 1)
    }

    /// Box ladder side lengths for pressure estimates.
    pub fn ladder(&self) -> Result<Vec<i64>> {
        match self.get("run", "ladder") {
            None => Ok(vec![10, 14]),
            Some(_) => self
                .list("run", "ladder")?
                .into_iter()
                .map(|x| {
                    if x > 0.0 && x.fract() == 0.0 {
                        Ok(x as i64)
                    } else {
                        Err(Error::invalid("ladder entries must be positive integers"))
                    }
                })
                .collect(),
        }
    }

    /// Optional bracketing window override `window = z_lo, z_hi`.
    pub fn window(&self) -> Result<Option<(f64, f64)>> {
        match self.get("run", "window") {
            None => Ok(None),
            Some(_) => {
                let w = self.list("run", "window")?;
                if w.len() != 2 || !(w[0] < w[1]) {
                    return Err(Error::invalid("window must be 'z_lo, z_hi' with z_lo < z_hi"));
                }
                Ok(Some((w[0], w[1])))
            }
        }
    }

    pub fn tol(&self) -> Result<f64> {
        self.num_or("run", "tol", 1e-10)
    }

    pub fn out_dir(&self) -> String {
        self.get("output", "dir").unwrap_or(".").to_string()
    }

    /// Canonical dump of every configured key, for output-file headers.
    pub fn resolved(&self) -> String {
        let mut out = String::new();
        for (name, kv) in &self.sections {
            out.push_str(&format!("[{name}]\n"));
            for (k, v) in kv {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

/// Two-column `radius,value` samples, header line optional.
pub fn phi_samples_from_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (ln == 0 && line.starts_with("radius")) {
            continue;
        }
        let mut it = line.split(',');
        let parse = |t: Option<&str>| -> Result<f64> {
            t.and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::invalid(format!("phi csv line {}: bad entry", ln + 1)))
        };
        out.push((parse(it.next())?, parse(it.next())?));
        if it.next().is_some() {
            return Err(Error::invalid(format!("phi csv line {}: expected 2 columns", ln + 1)));
        }
    }
    Ok(out)
}

/// `x1,…,xd,mark` with an empty mark column for unmarked points.
pub fn configuration_to_csv(omega: &Configuration, dim: usize) -> String {
    let mut out: String = (1..=dim).map(|k| format!("x{k},")).collect::<String>() + "mark\n";
    for p in &omega.points {
        for c in &p.pos[..dim] {
            out.push_str(&format!("{c},"));
        }
        if let Some(m) = p.mark {
            out.push_str(&format!("{m}"));
        }
        out.push('\n');
    }
    out
}

pub fn configuration_from_csv(text: &str, window: Window) -> Result<Configuration> {
    let dim = window.lo.len();
    let mut points = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("x1") {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != dim + 1 {
            return Err(Error::invalid(format!(
                "configuration csv line {}: expected {} columns",
                ln + 1,
                dim + 1
            )));
        }
        let pos: Vec<f64> = cells[..dim]
            .iter()
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("csv line {}: bad coordinate", ln + 1)))
            })
            .collect::<Result<_>>()?;
        let mark = match cells[dim].trim() {
            "" => None,
            t => Some(t.parse().map_err(|_| {
                Error::invalid(format!("csv line {}: bad mark", ln + 1))
            })?),
        };
        points.push(MarkedPoint { pos, mark });
    }
    Configuration::new(points, window)
}

pub fn configuration_json(omega: &Configuration, dim: usize, delta: f64) -> serde_json::Value {
    serde_json::json!({
        "schema": 1,
        "dimension": dim,
        "delta": delta,
        "window": { "lo": omega.window.lo, "hi": omega.window.hi },
        "points": omega
            .points
            .iter()
            .map(|p| {
                let mut row: Vec<serde_json::Value> =
                    p.pos[..dim].iter().map(|c| serde_json::json!(c)).collect();
                if let Some(m) = p.mark {
                    row.push(serde_json::json!(m));
                }
                serde_json::Value::Array(row)
            })
            .collect::<Vec<_>>(),
    })
}

pub fn contour_json(c: &Contour, dim: usize) -> serde_json::Value {
    serde_json::json!({
        "support": c.support.iter().map(|s| s.coords(dim)).collect::<Vec<_>>(),
        "spins": c.spins,
        "type": c.contour_type,
        "interiors": [
            c.interiors[0].iter().map(|s| s.coords(dim)).collect::<Vec<_>>(),
            c.interiors[1].iter().map(|s| s.coords(dim)).collect::<Vec<_>>(),
        ],
        "class": c.class(),
        "external": c.external,
        "dominoes": c
            .dominoes()
            .iter()
            .map(|(a, b)| (a.coords(dim), b.coords(dim)))
            .collect::<Vec<_>>(),
    })
}

pub fn trace_csv(trace: &Trace) -> String {
    let mut out = String::from("step,N,rho,occupied_frac,n_contours\n");
    for r in &trace.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.step, r.n, r.rho, r.occupied_frac, r.n_contours
        ));
    }
    out
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from("z,sharp,rho_mean,rho_se,occ_mean\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.z, r.sharp, r.rho_mean, r.rho_se, r.occ_mean
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const BASE: &str = "\
[model]
kind = surrogate
dim = 1
delta = 1.0
rho = 1
b0 = 1.0
table = penalized
penalty = 4.0

[run]
lambda = 12
beta = 5.0
z = 1.0
seed = 7
";

    #[test]
    fn parse_and_build() {
        let cfg = RunConfig::parse(BASE).unwrap();
        let model = cfg.model().unwrap();
        assert_eq!(model.dim, 1);
        assert_abs_diff_eq!(model.sat.b0, 1.0, epsilon = 1e-15);
        assert_eq!(cfg.lambda().unwrap().len(), 12);
        assert_eq!(cfg.seed().unwrap(), 7);
        assert_eq!(cfg.steps().unwrap(), 100_000); // default
        // resolved dump parses back to the same thing
        let again = RunConfig::parse(&cfg.resolved()).unwrap();
        assert_eq!(cfg.resolved(), again.resolved());
    }

    #[test]
    fn rejects_unknown_keys_and_sections() {
        assert!(RunConfig::parse("[model]\nkind = surrogate\nbogus = 1\n").is_err());
        assert!(RunConfig::parse("[model]\nkind = surrogate\nk = 3\n").is_err()); // knn-only key
        assert!(RunConfig::parse("[nope]\nx = 1\n").is_err());
        assert!(RunConfig::parse("[model]\nkind = surrogate\n[run]\nwat = 2\n").is_err());
        assert!(RunConfig::parse("[model]\nkind = mystery\n").is_err());
        assert!(RunConfig::parse("[model]\nkind = surrogate\nkind = surrogate\n").is_err());
        assert!(RunConfig::parse("stray = 1\n").is_err());
    }

    #[test]
    fn configuration_csv_round_trip() {
        let window = Window::new(vec![0.0, 0.0], vec![4.0, 4.0]).unwrap();
        let omega = Configuration::new(
            vec![
                MarkedPoint::new(vec![0.5, 1.25]),
                MarkedPoint::with_mark(vec![2.0, 3.5], 0.75),
            ],
            window.clone(),
        )
        .unwrap();
        let csv = configuration_to_csv(&omega, 2);
        assert!(csv.starts_with("x1,x2,mark\n"));
        let back = configuration_from_csv(&csv, window).unwrap();
        assert_eq!(back, omega);
        let j = configuration_json(&omega, 2, 1.0);
        assert_eq!(j["schema"], 1);
        assert_eq!(j["points"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn phi_csv_parsing() {
        let samples = phi_samples_from_csv("radius,value\n0.1,3.0\n0.2,-1.0\n").unwrap();
        assert_eq!(samples, vec![(0.1, 3.0), (0.2, -1.0)]);
        assert!(phi_samples_from_csv("0.1,1.0,9\n").is_err());
        assert!(phi_samples_from_csv("0.1\n").is_err());
    }
}
