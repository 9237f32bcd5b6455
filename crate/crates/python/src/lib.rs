//! Python module `relaysim_py`: relay specs, single runs, campaigns, and
//! the per-interval link evaluation used for SINR studies.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use relaysim::link_engine;
use relaysim::mac_phy::{self, McsTable};
use relaysim::sim::{self, campaign, LinkModel, RelaySpec, RunConfig, SimSetup};
use relaysim::traffic::UeMetrics;

/// Configuration problems become `ValueError`, everything else `RuntimeError`.
fn to_py(e: relaysim::Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Relay configuration, e.g. `Relay("irs:60x120")` or `Relay("af:16x16:40")`.
#[pyclass(name = "Relay", frozen, from_py_object)]
#[derive(Clone)]
struct PyRelay(RelaySpec);

#[pymethods]
impl PyRelay {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().map(Self).map_err(to_py)
    }

    #[getter]
    fn kind(&self) -> String {
        self.0.kind.to_ascii_lowercase()
    }

    #[getter]
    fn cols_h(&self) -> usize {
        self.0.cols_h
    }

    #[getter]
    fn rows_v(&self) -> usize {
        self.0.rows_v
    }

    #[getter]
    fn n_elements(&self) -> usize {
        self.0.n_elements()
    }

    #[getter]
    fn amp_gain_db(&self) -> f64 {
        self.0.amp_gain_db
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Relay('{}')", self.0)
    }
}

/// KPIs of one UE over a run.
#[pyclass(name = "UeMetrics", get_all, frozen, from_py_object)]
#[derive(Clone)]
struct PyUeMetrics {
    throughput_bps: f64,
    latency_p95_ms: Option<f64>,
    latency_mean_ms: Option<f64>,
    per: Option<f64>,
    sinr_mean_db: Option<f64>,
    generated: u64,
    delivered: u64,
    lost: u64,
    pending: u64,
}

impl From<&UeMetrics> for PyUeMetrics {
    fn from(m: &UeMetrics) -> Self {
        Self {
            throughput_bps: m.throughput_bps,
            latency_p95_ms: m.latency_p95_s.map(|s| s * 1e3),
            latency_mean_ms: m.latency_mean_s.map(|s| s * 1e3),
            per: m.per,
            sinr_mean_db: m.sinr_mean_db,
            generated: m.generated,
            delivered: m.delivered,
            lost: m.lost,
            pending: m.pending,
        }
    }
}

#[pymethods]
impl PyUeMetrics {
    fn __repr__(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("None".to_string(), |x| format!("{x:.4}"));
        format!(
            "UeMetrics(throughput_bps={:.1}, latency_p95_ms={}, per={}, sinr_mean_db={})",
            self.throughput_bps,
            opt(self.latency_p95_ms),
            opt(self.per),
            opt(self.sinr_mean_db)
        )
    }
}

/// Outcome of `run`: per-UE metrics plus the effective-SINR trace as
/// `(t_s, ue, eff_sinr_db)` tuples.
#[pyclass(name = "RunResult", get_all, frozen)]
struct PyRunResult {
    run_id: String,
    seed: u64,
    duration_s: f64,
    per_ue: BTreeMap<u32, PyUeMetrics>,
    sinr_trace: Vec<(f64, u32, f64)>,
}

#[pymethods]
impl PyRunResult {
    fn __repr__(&self) -> String {
        format!("RunResult('{}', {} UEs, {} trace rows)", self.run_id, self.per_ue.len(), self.sinr_trace.len())
    }
}

fn relay_arg(relay: Option<&str>) -> PyResult<Option<RelaySpec>> {
    relay.map(|r| r.parse::<RelaySpec>()).transpose().map_err(to_py)
}

/// Simulates one scenario. Output files are written only when `out` is given.
#[pyfunction]
#[pyo3(signature = (scenario, relay=None, duration=2.0, seed=42, out=None, trace_packets=false))]
fn run(
    py: Python<'_>,
    scenario: PathBuf,
    relay: Option<&str>,
    duration: f64,
    seed: u64,
    out: Option<PathBuf>,
    trace_packets: bool,
) -> PyResult<PyRunResult> {
    let mut cfg = RunConfig::new(scenario);
    cfg.relay_override = relay_arg(relay)?;
    cfg.duration_s = duration;
    cfg.seed = seed;
    cfg.out_dir = out;
    cfg.trace_packets = trace_packets;
    let res = py.detach(|| sim::run(&cfg)).map_err(to_py)?;
    let summary = &res.output.summary;
    Ok(PyRunResult {
        run_id: res.label.run_id.clone(),
        seed,
        duration_s: summary.duration_s,
        per_ue: summary.per_ue.iter().map(|(k, m)| (*k, m.into())).collect(),
        sinr_trace: res.output.trace.rows.iter().map(|r| (r.t_s, r.ue, r.eff_sinr_db)).collect(),
    })
}

/// Runs every (relay, seed) cell and returns one row per cell as a dict
/// with the `summary.csv` columns (KPIs averaged over UEs).
#[pyfunction]
#[pyo3(signature = (scenario, grid, seeds, duration=2.0, out=None))]
fn run_campaign(
    py: Python<'_>,
    scenario: PathBuf,
    grid: Vec<String>,
    seeds: Vec<u64>,
    duration: f64,
    out: Option<PathBuf>,
) -> PyResult<Vec<BTreeMap<&'static str, Py<PyAny>>>> {
    let grid = grid.iter().map(|g| g.parse::<RelaySpec>()).collect::<Result<Vec<_>, _>>().map_err(to_py)?;
    let mut base = RunConfig::new(scenario);
    base.duration_s = duration;
    let res = py
        .detach(|| campaign::sweep_campaign(&base, &grid, &seeds, out.as_deref()))
        .map_err(to_py)?;
    res.rows
        .iter()
        .map(|r| {
            let mut d = BTreeMap::new();
            d.insert("run_id", r.run_id.clone().into_pyobject(py)?.into_any().unbind());
            d.insert("relay_kind", r.relay_kind.clone().into_pyobject(py)?.into_any().unbind());
            d.insert("relay_elems", r.relay_elems.into_pyobject(py)?.into_any().unbind());
            d.insert("seed", r.seed.into_pyobject(py)?.into_any().unbind());
            d.insert("throughput_bps", r.throughput_bps.into_pyobject(py)?.into_any().unbind());
            d.insert("latency_p95_ms", r.latency_p95_ms.into_pyobject(py)?.into_any().unbind());
            d.insert("per", r.per.into_pyobject(py)?.into_any().unbind());
            d.insert("sinr_mean_db", r.sinr_mean_db.into_pyobject(py)?.into_any().unbind());
            Ok(d)
        })
        .collect()
}

/// Effective SINR (dB) of every UE in one coherence interval, after the
/// beam sweep. No traffic is simulated.
#[pyfunction]
#[pyo3(signature = (scenario, relay=None, seed=0, interval=0))]
fn interval_sinr(py: Python<'_>, scenario: PathBuf, relay: Option<&str>, seed: u64, interval: u64) -> PyResult<BTreeMap<u32, f64>> {
    let relay = relay_arg(relay)?;
    py.detach(|| {
        let setup = SimSetup::from_path(&scenario, relay)?;
        let model = LinkModel::new(&setup)?;
        let t0 = interval as f64 * model.coherence_s();
        let links = model.draw(seed, interval, t0)?;
        Ok(links.per_ue.iter().map(|(ue, s)| (*ue, s.report.effective_db)).collect())
    })
    .map_err(to_py)
}

/// EESM compression of per-subband SINRs (dB) into one effective SINR (dB).
#[pyfunction]
fn effective_sinr(per_subband_db: Vec<f64>, beta: f64) -> PyResult<f64> {
    link_engine::effective_sinr(&per_subband_db, beta).map_err(to_py)
}

/// Index and spectral efficiency of the MCS the default table picks at
/// `eff_sinr_db`, or `None` below the lowest threshold.
#[pyfunction]
fn select_mcs(eff_sinr_db: f64) -> Option<(u32, f64)> {
    mac_phy::select_mcs(&McsTable::default(), eff_sinr_db).map(|e| (e.index, e.spectral_eff))
}

#[pymodule]
fn relaysim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRelay>()?;
    m.add_class::<PyUeMetrics>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(interval_sinr, m)?)?;
    m.add_function(wrap_pyfunction!(effective_sinr, m)?)?;
    m.add_function(wrap_pyfunction!(select_mcs, m)?)?;
    Ok(())
}
