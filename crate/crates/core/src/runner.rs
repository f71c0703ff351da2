//! Runs a configured scenario and writes fields, diagnostics and a manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, SolverChoice};
use crate::diagnostics::{
    compare_fields, energy, energy_rate_check, forcing_norm, interior_pde_residual, max_energy_increase,
    vertex_residuals, Comparison, EnergySeries, ResidualReport,
};
use crate::error::{Error, Result};
use crate::graph::{validate_graph, WellPosednessReport};
use crate::oracle;
use crate::potential::field::PotentialSolution;
use crate::potential::march::march_volterra;
use crate::potential::source::SourcePotentialSet;
use crate::wavefield::WaveField;

pub const MANIFEST_NAME: &str = "manifest.toml";

/// Overrides applied on top of a configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub solver: Option<SolverChoice>,
    pub refine: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub exit_code: i32,
    pub code_version: String,
    pub scenario: String,
    pub solver: SolverChoice,
    pub refine: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failing_block: Option<usize>,
    pub warnings: Vec<String>,
    pub files: Vec<FileRecord>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub well_posedness: Option<WellPosednessReport>,
    pub config: toml::Table,
}

/// Output files written so far, removed again if the run fails.
struct Outputs {
    dir: PathBuf,
    files: Vec<FileRecord>,
}

impl Outputs {
    fn write(&mut self, name: &str, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.partial"));
        let res = (|| -> std::io::Result<()> {
            let mut w = BufWriter::new(fs::File::create(&tmp)?);
            fill(&mut w)?;
            w.flush()?;
            drop(w);
            fs::rename(&tmp, &path)
        })();
        if let Err(e) = res {
            let _ = fs::remove_file(&tmp);
            return Err(e.into());
        }
        let bytes = fs::read(&path)?;
        self.files.push(FileRecord {
            name: name.to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn discard(&mut self) {
        for f in self.files.drain(..) {
            let _ = fs::remove_file(self.dir.join(&f.name));
        }
    }
}

fn write_field(w: &mut dyn Write, field: &WaveField) -> std::io::Result<()> {
    writeln!(w, "bond_id,x,t,u")?;
    for (it, t) in field.times.iter().enumerate() {
        for b in &field.bonds {
            for (x, u) in b.x.iter().zip(&b.values[it]) {
                writeln!(w, "{},{:.16e},{:.16e},{:.16e}", b.bond, x, t, u)?;
            }
        }
    }
    Ok(())
}

fn ndjson<T: Serialize>(w: &mut dyn Write, records: impl Iterator<Item = T>) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, &r)?;
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EnergyRecord {
    t: f64,
    energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_norm_u_norm: Option<f64>,
}

fn energy_records<'a>(e: &'a EnergySeries, fu: Option<&'a [f64]>) -> impl Iterator<Item = EnergyRecord> + 'a {
    e.times.iter().zip(&e.energy).enumerate().map(move |(i, (&t, &energy))| EnergyRecord {
        t,
        energy,
        f_norm_u_norm: fu.map(|v| v[i]),
    })
}

fn residual_records(r: &ResidualReport) -> impl Iterator<Item = serde_json::Value> + '_ {
    r.times.iter().zip(&r.per_time).map(|(t, row)| {
        let mut m = serde_json::Map::new();
        m.insert("t".into(), (*t).into());
        for (name, v) in r.names.iter().zip(row) {
            m.insert(name.clone(), (*v).into());
        }
        serde_json::Value::Object(m)
    })
}

#[derive(Serialize)]
struct ComparisonRecord {
    t: f64,
    rel_l2: f64,
    sup: f64,
}

struct Stage {
    manifest: RunManifest,
    outputs: Outputs,
}

impl Stage {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.manifest.timings.insert(name.to_string(), start.elapsed().as_secs_f64());
        out
    }
}

/// Runs `config` with `options` applied.
///
/// On failure every output file is removed and a manifest recording the
/// error is written in their place.
pub fn run_scenario(config: &RunConfig, options: &RunOptions) -> Result<RunManifest> {
    let refine = options.refine.max(1);
    let cfg = config.refined(refine);
    let solver = options.solver.unwrap_or(cfg.scenario.solver);
    let dir = options.out_dir.clone().unwrap_or_else(|| cfg.output.directory.clone());
    fs::create_dir_all(&dir)?;
    let manifest = RunManifest {
        status: "ok".into(),
        error: None,
        exit_code: 0,
        code_version: env!("CARGO_PKG_VERSION").into(),
        scenario: cfg.scenario.name.clone(),
        solver,
        refine,
        failing_block: None,
        warnings: Vec::new(),
        files: Vec::new(),
        timings: BTreeMap::new(),
        metrics: BTreeMap::new(),
        well_posedness: None,
        config: cfg.to_toml().parse().expect("echo is valid TOML"),
    };
    let mut stage = Stage { manifest, outputs: Outputs { dir: dir.clone(), files: Vec::new() } };
    let started = Instant::now();
    let result = execute(&cfg, solver, &mut stage);
    stage.manifest.timings.insert("total".into(), started.elapsed().as_secs_f64());
    match result {
        Ok(()) => {
            stage.manifest.files = stage.outputs.files.clone();
            write_manifest(&dir, &stage.manifest)?;
            Ok(stage.manifest)
        }
        Err(e) => {
            stage.outputs.discard();
            stage.manifest.files.clear();
            stage.manifest.status = "failed".into();
            stage.manifest.error = Some(e.to_string());
            stage.manifest.exit_code = e.exit_code();
            if let Error::WellPosedness { block, .. } = e {
                stage.manifest.failing_block = Some(block);
            }
            write_manifest(&dir, &stage.manifest)?;
            Err(e)
        }
    }
}

fn write_manifest(dir: &Path, m: &RunManifest) -> Result<()> {
    let text = toml::to_string(m).map_err(|e| Error::Numerical(format!("manifest serialisation: {e}")))?;
    let tmp = dir.join(format!(".{MANIFEST_NAME}.partial"));
    fs::write(&tmp, text)?;
    fs::rename(&tmp, dir.join(MANIFEST_NAME))?;
    Ok(())
}

fn execute(cfg: &RunConfig, solver: SolverChoice, st: &mut Stage) -> Result<()> {
    let graph = cfg.graph()?;
    let report = validate_graph(&graph, cfg.graph.det_tolerance)?;
    st.manifest.well_posedness = Some(report.clone());
    if !report.energy_condition_holds() {
        let msg = "weights violate the energy condition 1/b_2i^2 + 1/b_2i+1^2 <= 1; uniqueness is not guaranteed";
        warn!("{msg}");
        st.manifest.warnings.push(msg.into());
    }
    if let Err(e) = report.gate() {
        if solver.potential() {
            return Err(e);
        }
        st.manifest.failing_block = report.failing_block();
        let msg = format!("degraded run: {e}");
        warn!("{msg}");
        st.manifest.warnings.push(msg);
    }

    let mut potential_field = None;
    if solver.potential() {
        let grid = cfg.time_grid()?;
        let sources = SourcePotentialSet::new(&cfg.scenario.forcing, &cfg.scenario.initial);
        info!("marching the Volterra system over {} steps", grid.n_steps);
        let densities = st.time("potential_march", || march_volterra(&graph, &sources, &grid, cfg.graph.det_tolerance))?;
        let sol = PotentialSolution { graph: graph.clone(), sources, densities };
        info!("evaluating the potential field");
        let field = st.time("potential_field", || sol.wave_field(&cfg.output_grid()))?;
        let mut res = vertex_residuals(&field, &graph)?;
        if cfg.grids.t_stride == 1 {
            res.interior_pde = Some(interior_pde_residual(&field, 2, &cfg.scenario.forcing, cfg.output.compare_t_min)?);
        }
        let e = energy(&field);
        st.outputs.write("potential_field.csv", |w| write_field(w, &field))?;
        st.outputs.write("potential_energy.ndjson", |w| ndjson(w, energy_records(&e, None)))?;
        st.outputs.write("potential_residuals.ndjson", |w| ndjson(w, residual_records(&res)))?;
        let m = &mut st.manifest.metrics;
        m.insert("potential_max_vertex_residual".into(), res.max_abs.iter().fold(0.0, |a: f64, b| a.max(*b)));
        if let Some(p) = res.interior_pde {
            m.insert("potential_interior_pde_residual".into(), p);
        }
        potential_field = Some(field);
    }

    if solver.oracle() {
        let mesh = cfg.mesh();
        info!("running the finite-difference oracle over {} steps", mesh.n_steps);
        let run = st.time("oracle", || oracle::run(&graph, &mesh, &cfg.scenario.initial, &cfg.scenario.forcing))?;
        st.manifest.warnings.extend(run.warnings.iter().cloned());
        let e = energy(&run.field);
        let fnorm = forcing_norm(&run.field, &cfg.scenario.forcing);
        let fu: Vec<f64> = e.energy.iter().map(|v| fnorm * v.max(0.0).sqrt()).collect();
        let tol = mesh.dt() + mesh.dx * mesh.dx;
        let rate = energy_rate_check(&e, &fu, tol)?;
        let res = vertex_residuals(&run.field, &graph)?;
        let stride = (cfg.grids.output_dx / mesh.dx).round() as usize;
        let written = run.field.restrict(cfg.grids.window, stride, cfg.grids.t_stride);
        st.outputs.write("oracle_field.csv", |w| write_field(w, &written))?;
        st.outputs.write("oracle_energy.ndjson", |w| ndjson(w, energy_records(&e, Some(&fu))))?;
        st.outputs.write("oracle_residuals.ndjson", |w| ndjson(w, residual_records(&res)))?;
        let m = &mut st.manifest.metrics;
        m.insert("oracle_max_vertex_residual".into(), res.max_abs.iter().fold(0.0, |a: f64, b| a.max(*b)));
        m.insert("oracle_far_field".into(), res.far_field);
        m.insert("oracle_max_energy_increase".into(), max_energy_increase(&e));
        m.insert("oracle_rate_worst_margin".into(), rate.worst_margin);
        if !rate.passed {
            let msg = format!("energy rate inequality exceeded by {:.3e} at step {}", rate.worst_margin, rate.worst_step);
            warn!("{msg}");
            st.manifest.warnings.push(msg);
        }

        if let Some(pf) = &potential_field {
            let cmp: Comparison = compare_fields(pf, &run.field, &cfg.window())?;
            st.outputs.write("comparison.ndjson", |w| {
                ndjson(w, cmp.per_time.iter().map(|&(t, rel_l2, sup)| ComparisonRecord { t, rel_l2, sup }))
            })?;
            st.manifest.metrics.insert("comparison_rel_l2".into(), cmp.rel_l2);
            st.manifest.metrics.insert("comparison_sup".into(), cmp.sup);
            info!("potential vs oracle: relative L2 {:.3e}, sup {:.3e}", cmp.rel_l2, cmp.sup);
        }
    }
    Ok(())
}
