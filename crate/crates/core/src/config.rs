//! Run configuration: a TOML document with `graph`, `scenario`, `grids`
//! and `output` sections.
//!
//! ```toml
//! [graph]
//! length = 1.0
//! a_2 = 0.9   # ... through a_7, and b_2 ... b_7
//!
//! [scenario]
//! name = "bump-on-bond-2"
//! solver = "both"
//! forcing = [{ family = "gaussian_bump", bond = 2, center = 0.5, width = 0.1, amplitude = 1.0 }]
//!
//! [grids]
//! t_max = 1.0
//! n_steps = 512
//! dx = 0.0078125
//! truncation = 8.0
//!
//! [output]
//! directory = "out"
//! ```
//!
//! Every missing or invalid key is reported, not only the first.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::diagnostics::Window;
use crate::error::{Error, Result};
use crate::fractional::TimeGrid;
use crate::graph::{BondSpec, TreeGraph, VertexWeights, DEFAULT_DET_TOLERANCE};
use crate::oracle::TruncatedMesh;
use crate::potential::field::OutputGrid;
use crate::potential::source::SourceTerm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Potential,
    Oracle,
    Both,
}

impl SolverChoice {
    pub fn potential(self) -> bool {
        matches!(self, Self::Potential | Self::Both)
    }

    pub fn oracle(self) -> bool {
        matches!(self, Self::Oracle | Self::Both)
    }
}

impl std::str::FromStr for SolverChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "potential" => Ok(Self::Potential),
            "oracle" => Ok(Self::Oracle),
            "both" => Ok(Self::Both),
            _ => Err(format!("unknown solver '{s}' (expected potential, oracle or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub length: f64,
    pub weights: VertexWeights,
    pub det_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub solver: SolverChoice,
    pub forcing: Vec<SourceTerm>,
    pub initial: Vec<SourceTerm>,
    /// Lets the potential solver take initial data through a volume potential.
    pub initial_volume_potential: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub t_max: f64,
    pub n_steps: usize,
    /// Oracle spacing.
    pub dx: f64,
    pub truncation: f64,
    pub theta: f64,
    /// Spacing of written fields; a multiple of `dx`.
    pub output_dx: f64,
    /// Half-width of the written region on unbounded bonds.
    pub window: f64,
    pub t_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Comparison window in time is `[compare_t_min, t_max]`.
    pub compare_t_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub graph: GraphConfig,
    pub scenario: ScenarioConfig,
    pub grids: GridConfig,
    pub output: OutputConfig,
}

struct Reader<'a> {
    doc: &'a Table,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn section(&mut self, name: &str) -> Option<&'a Table> {
        match self.doc.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.errors.push(format!("{name}: expected a section"));
                None
            }
            None => {
                self.errors.push(format!("{name}: missing section"));
                None
            }
        }
    }

    fn number(&mut self, sec: Option<&Table>, sname: &str, key: &str, default: Option<f64>) -> f64 {
        let Some(sec) = sec else { return default.unwrap_or(f64::NAN) };
        match sec.get(key) {
            Some(Value::Float(v)) => *v,
            Some(Value::Integer(v)) => *v as f64,
            Some(v) => {
                self.errors.push(format!("{sname}.{key} = {v}: expected a number"));
                f64::NAN
            }
            None => default.unwrap_or_else(|| {
                self.errors.push(format!("{sname}.{key}: missing key"));
                f64::NAN
            }),
        }
    }

    fn positive(&mut self, sec: Option<&Table>, sname: &str, key: &str, default: Option<f64>) -> f64 {
        let v = self.number(sec, sname, key, default);
        if !v.is_nan() && !(v > 0.0 && v.is_finite()) {
            self.errors.push(format!("{sname}.{key} = {v}: must be positive"));
        }
        v
    }

    fn count(&mut self, sec: Option<&Table>, sname: &str, key: &str, default: Option<usize>) -> usize {
        let Some(sec) = sec else { return default.unwrap_or(0) };
        match sec.get(key) {
            Some(Value::Integer(v)) if *v > 0 => *v as usize,
            Some(v) => {
                self.errors.push(format!("{sname}.{key} = {v}: must be a positive integer"));
                0
            }
            None => default.unwrap_or_else(|| {
                self.errors.push(format!("{sname}.{key}: missing key"));
                0
            }),
        }
    }

    fn string(&mut self, sec: Option<&Table>, sname: &str, key: &str, default: Option<&str>) -> String {
        let Some(sec) = sec else { return String::new() };
        match sec.get(key) {
            Some(Value::String(s)) => s.clone(),
            Some(v) => {
                self.errors.push(format!("{sname}.{key} = {v}: expected a string"));
                String::new()
            }
            None => default.map(str::to_string).unwrap_or_else(|| {
                self.errors.push(format!("{sname}.{key}: missing key"));
                String::new()
            }),
        }
    }

    fn terms(&mut self, sec: Option<&Table>, key: &str) -> Vec<SourceTerm> {
        let Some(Some(v)) = sec.map(|s| s.get(key)) else { return Vec::new() };
        let Value::Array(items) = v else {
            self.errors.push(format!("scenario.{key}: expected an array of tables"));
            return Vec::new();
        };
        let mut out = Vec::new();
        for (i, item) in items.iter().enumerate() {
            match item.clone().try_into::<SourceTerm>() {
                Ok(t) => out.push(t),
                Err(e) => self.errors.push(format!("scenario.{key}[{i}]: {}", e.message())),
            }
        }
        out
    }
}

impl RunConfig {
    /// Parses and validates a configuration document.
    pub fn parse(text: &str) -> Result<Self> {
        let doc: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.message().to_string()]))?;
        let mut r = Reader { doc: &doc, errors: Vec::new() };

        let g = r.section("graph");
        let length = r.positive(g, "graph", "length", None);
        let mut a = [0.0; 6];
        let mut b = [0.0; 6];
        for k in 2..=7 {
            a[k - 2] = r.number(g, "graph", &format!("a_{k}"), None);
            b[k - 2] = r.number(g, "graph", &format!("b_{k}"), None);
        }
        let weights = VertexWeights { a, b };
        for v in weights.violations() {
            if !v.contains("NaN") {
                r.errors.push(format!("graph.{v}"));
            }
        }
        let det_tolerance = r.positive(g, "graph", "det_tolerance", Some(DEFAULT_DET_TOLERANCE));

        let s = r.section("scenario");
        let name = r.string(s, "scenario", "name", Some("unnamed"));
        let solver_name = r.string(s, "scenario", "solver", Some("both"));
        let solver = solver_name.parse().unwrap_or_else(|e| {
            r.errors.push(format!("scenario.solver: {e}"));
            SolverChoice::Both
        });
        let forcing = r.terms(s, "forcing");
        let initial = r.terms(s, "initial");
        let initial_volume_potential = match s.and_then(|s| s.get("initial_volume_potential")) {
            None => false,
            Some(Value::Boolean(v)) => *v,
            Some(v) => {
                r.errors.push(format!("scenario.initial_volume_potential = {v}: expected true or false"));
                false
            }
        };

        let gr = r.section("grids");
        let t_max = r.positive(gr, "grids", "t_max", None);
        let n_steps = r.count(gr, "grids", "n_steps", None);
        let dx = r.positive(gr, "grids", "dx", None);
        let truncation = r.positive(gr, "grids", "truncation", Some(20.0 * length));
        let theta = r.number(gr, "grids", "theta", Some(0.5));
        let output_dx = r.positive(gr, "grids", "output_dx", Some(dx));
        let window = r.positive(gr, "grids", "window", Some((5.0 * length).min(truncation)));
        let t_stride = r.count(gr, "grids", "t_stride", Some(1));

        let o = r.section("output");
        let directory = PathBuf::from(r.string(o, "output", "directory", Some("out")));
        let compare_t_min = r.number(o, "output", "compare_t_min", Some(0.2 * t_max));

        let mut errors = r.errors;
        let cfg = RunConfig {
            graph: GraphConfig { length, weights, det_tolerance },
            scenario: ScenarioConfig { name, solver, forcing, initial, initial_volume_potential },
            grids: GridConfig { t_max, n_steps, dx, truncation, theta, output_dx, window, t_stride },
            output: OutputConfig { directory, compare_t_min },
        };
        if errors.is_empty() {
            errors.extend(cfg.semantic_violations());
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::parse(&text)
    }

    /// Cross-key checks on an otherwise well-formed configuration.
    fn semantic_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let gr = &self.grids;
        if let Err(Error::Config(m)) = self.mesh().validate() {
            v.extend(m.into_iter().map(|s| format!("grids: {s}")));
        }
        let ratio = gr.output_dx / gr.dx;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio.round() < 1.0 {
            v.push(format!("grids.output_dx = {}: must be a multiple of grids.dx = {}", gr.output_dx, gr.dx));
        }
        let per_l = self.graph.length / gr.output_dx;
        if (per_l - per_l.round()).abs() > 1e-9 * per_l.max(1.0) || per_l.round() < 4.0 {
            v.push(format!("grids.output_dx = {}: must divide graph.length into at least 4 cells", gr.output_dx));
        }
        if gr.window > gr.truncation {
            v.push(format!("grids.window = {} exceeds grids.truncation = {}", gr.window, gr.truncation));
        }
        if !(0.0..gr.t_max).contains(&self.output.compare_t_min) {
            v.push(format!("output.compare_t_min = {}: must lie in [0, t_max)", self.output.compare_t_min));
        }
        for (key, terms) in [("forcing", &self.scenario.forcing), ("initial", &self.scenario.initial)] {
            for (i, t) in terms.iter().enumerate() {
                let Some(bond) = t.bond() else { continue };
                match BondSpec::new(bond, self.graph.length) {
                    Ok(spec) => v.extend(t.violations(&spec, gr.truncation, &format!("scenario.{key}[{i}]"))),
                    Err(e) => v.push(format!("scenario.{key}[{i}].bond: {e}")),
                }
            }
        }
        if !self.scenario.initial.is_empty() && self.scenario.solver.potential() && !self.scenario.initial_volume_potential
        {
            v.push(
                "scenario.initial: the potential solver takes initial data only with \
                 scenario.initial_volume_potential = true"
                    .into(),
            );
        }
        v
    }

    /// Multiplies every grid resolution by `factor`; written samples stay
    /// at the same times.
    pub fn refined(&self, factor: usize) -> Self {
        let f = factor.max(1);
        let mut c = self.clone();
        c.grids.n_steps *= f;
        c.grids.dx /= f as f64;
        c.grids.output_dx /= f as f64;
        c.grids.t_stride *= f;
        c
    }

    pub fn graph(&self) -> Result<TreeGraph> {
        TreeGraph::new(self.graph.weights, self.graph.length)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grids.t_max, self.grids.n_steps)
    }

    pub fn mesh(&self) -> TruncatedMesh {
        TruncatedMesh {
            length: self.graph.length,
            truncation: self.grids.truncation,
            dx: self.grids.dx,
            t_max: self.grids.t_max,
            n_steps: self.grids.n_steps,
            theta: self.grids.theta,
        }
    }

    pub fn output_grid(&self) -> OutputGrid {
        OutputGrid { dx: self.grids.output_dx, window: self.grids.window, t_stride: self.grids.t_stride }
    }

    pub fn window(&self) -> Window {
        Window { x_max: self.grids.window, t_min: self.output.compare_t_min, t_max: self.grids.t_max }
    }

    /// The configuration as TOML, for the manifest.
    pub fn to_toml(&self) -> String {
        let g = &self.graph;
        let mut graph = Table::new();
        graph.insert("length".into(), g.length.into());
        for k in 2..=7 {
            graph.insert(format!("a_{k}"), g.weights.a(k).into());
            graph.insert(format!("b_{k}"), g.weights.b(k).into());
        }
        graph.insert("det_tolerance".into(), g.det_tolerance.into());
        let terms = |ts: &[SourceTerm]| -> Value {
            Value::Array(ts.iter().filter_map(|t| Value::try_from(t).ok()).collect())
        };
        let mut scenario = Table::new();
        scenario.insert("name".into(), self.scenario.name.clone().into());
        let solver = match self.scenario.solver {
            SolverChoice::Potential => "potential",
            SolverChoice::Oracle => "oracle",
            SolverChoice::Both => "both",
        };
        scenario.insert("solver".into(), solver.into());
        scenario.insert("forcing".into(), terms(&self.scenario.forcing));
        scenario.insert("initial".into(), terms(&self.scenario.initial));
        scenario.insert("initial_volume_potential".into(), self.scenario.initial_volume_potential.into());
        let gr = &self.grids;
        let mut grids = Table::new();
        grids.insert("t_max".into(), gr.t_max.into());
        grids.insert("n_steps".into(), (gr.n_steps as i64).into());
        grids.insert("dx".into(), gr.dx.into());
        grids.insert("truncation".into(), gr.truncation.into());
        grids.insert("theta".into(), gr.theta.into());
        grids.insert("output_dx".into(), gr.output_dx.into());
        grids.insert("window".into(), gr.window.into());
        grids.insert("t_stride".into(), (gr.t_stride as i64).into());
        let mut output = Table::new();
        output.insert("directory".into(), self.output.directory.display().to_string().into());
        output.insert("compare_t_min".into(), self.output.compare_t_min.into());
        let mut doc = Table::new();
        doc.insert("graph".into(), graph.into());
        doc.insert("scenario".into(), scenario.into());
        doc.insert("grids".into(), grids.into());
        doc.insert("output".into(), output.into());
        toml::to_string(&doc).expect("plain tables serialise")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal() -> String {
        let mut s = String::from("[graph]\nlength = 1.0\n");
        for k in 2..=7 {
            s += &format!("a_{k} = 1\nb_{k} = 1\n");
        }
        s += "[scenario]\n[grids]\nt_max = 1.0\nn_steps = 16\ndx = 0.125\ntruncation = 5.0\n[output]\n";
        s
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse(&minimal()).unwrap();
        assert_eq!(c.graph.weights, VertexWeights::uniform(1.0, 1.0));
        assert_eq!(c.scenario.solver, SolverChoice::Both);
        assert_eq!(c.grids.theta, 0.5);
        assert_eq!(c.grids.output_dx, 0.125);
        assert!(c.scenario.forcing.is_empty());
        // too few written cells on the finite bonds
        let text = minimal().replace("[output]", "output_dx = 0.5\n[output]");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn zero_weight_is_named() {
        let text = minimal().replace("b_2 = 1", "b_2 = 0");
        match RunConfig::parse(&text) {
            Err(Error::Config(v)) => {
                assert_eq!(v.len(), 1, "{v:?}");
                assert!(v[0].contains("b_2") && v[0].contains("nonzero"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn every_violation_is_listed() {
        let text = minimal()
            .replace("t_max = 1.0", "t_max = -1")
            .replace("a_3 = 1\n", "")
            .replace("n_steps = 16", "n_steps = \"many\"");
        match RunConfig::parse(&text) {
            Err(Error::Config(v)) => {
                assert!(v.iter().any(|e| e.contains("grids.t_max") && e.contains("positive")), "{v:?}");
                assert!(v.iter().any(|e| e.contains("a_3") && e.contains("missing")), "{v:?}");
                assert!(v.iter().any(|e| e.contains("grids.n_steps")), "{v:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn forcing_terms_are_checked() {
        let text = minimal().replace(
            "[scenario]",
            "[scenario]\nforcing = [{ family = \"gaussian_bump\", bond = 2, center = 0.9, width = 0.1, amplitude = 1.0 },\
             { family = \"triangle\", bond = 3 }]",
        );
        match RunConfig::parse(&text) {
            Err(Error::Config(v)) => {
                assert_eq!(v.len(), 1, "{v:?}");
                assert!(v[0].contains("scenario.forcing[1]"));
            }
            other => panic!("{other:?}"),
        }
        let text = text.replace(",{ family = \"triangle\", bond = 3 }", "");
        match RunConfig::parse(&text) {
            Err(Error::Config(v)) => assert!(v[0].contains("support"), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn initial_data_needs_the_extension_flag_for_the_potential_solver() {
        let base = minimal().replace(
            "[scenario]",
            "[scenario]\ninitial = [{ family = \"gaussian_bump\", bond = 2, center = 0.5, width = 0.1, amplitude = 1.0 }]",
        );
        assert!(RunConfig::parse(&base).is_err());
        assert!(RunConfig::parse(&base.replace("[scenario]", "[scenario]\nsolver = \"oracle\"")).is_ok());
        let flagged = base.replace("[scenario]", "[scenario]\ninitial_volume_potential = true");
        assert!(RunConfig::parse(&flagged).is_ok());
    }

    #[test]
    fn echo_round_trips() {
        let text = minimal().replace(
            "[scenario]",
            "[scenario]\nforcing = [{ family = \"gaussian_bump\", bond = 2, center = 0.5, width = 0.1, amplitude = 1.0 }]",
        );
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn refinement_keeps_output_times() {
        let c = RunConfig::parse(&minimal()).unwrap().refined(2);
        assert_eq!((c.grids.n_steps, c.grids.dx, c.grids.t_stride), (32, 0.0625, 2));
    }
}
