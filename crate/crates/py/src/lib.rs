//! Python bindings for the siglink toolkit.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use siglink::des::{self, Policy, SimParams};
use siglink::framing;
use siglink::isc::{self, ChannelModel, ModulationProfile};
use siglink::ppm;
use siglink::queueing::{self, CloudSystemConfig, DisplayQueueConfig, EvaluationMode};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_mode(mode: &str) -> PyResult<EvaluationMode> {
    match mode {
        "verbatim" => Ok(EvaluationMode::Verbatim),
        "corrected" => Ok(EvaluationMode::Corrected),
        other => Err(value_err(format!("unknown mode {other:?}"))),
    }
}

fn parse_policy(policy: &str) -> PyResult<Policy> {
    match policy {
        "static" => Ok(Policy::StaticPartition),
        "dynamic" => Ok(Policy::DynamicBorrow),
        other => Err(value_err(format!("unknown policy {other:?}"))),
    }
}

fn build_system(displays: Vec<(u32, f64)>, service_rate: f64) -> PyResult<CloudSystemConfig> {
    let cfgs: Result<Vec<_>, _> = displays
        .iter()
        .enumerate()
        .map(|(i, &(channels, rate))| {
            DisplayQueueConfig::new((i + 1) as u32, channels, rate, service_rate)
        })
        .collect();
    CloudSystemConfig::new(cfgs.map_err(value_err)?).map_err(value_err)
}

/// An 8-bit RGB frame backed by row-major interleaved samples.
#[pyclass(name = "Frame", skip_from_py_object)]
#[derive(Clone)]
struct PyFrame {
    inner: isc::Frame,
}

#[pymethods]
impl PyFrame {
    #[new]
    fn new(width: u32, height: u32, samples: Vec<u8>) -> PyResult<Self> {
        Ok(PyFrame {
            inner: isc::Frame::new(width, height, samples).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn uniform(width: u32, height: u32, rgb: (u8, u8, u8)) -> Self {
        PyFrame {
            inner: isc::Frame::uniform(width, height, [rgb.0, rgb.1, rgb.2]),
        }
    }

    #[staticmethod]
    fn load_ppm(path: &str) -> PyResult<Self> {
        Ok(PyFrame {
            inner: ppm::load_frame_ppm(path.as_ref()).map_err(value_err)?,
        })
    }

    fn save_ppm(&self, path: &str) -> PyResult<()> {
        ppm::store_frame_ppm(&self.inner, path.as_ref()).map_err(value_err)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.height()
    }

    fn samples(&self) -> Vec<u8> {
        self.inner.samples().to_vec()
    }

    fn pixel(&self, x: u32, y: u32) -> (u8, u8, u8) {
        let [r, g, b] = self.inner.pixel(x, y);
        (r, g, b)
    }

    fn __eq__(&self, other: &PyFrame) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Frame({}x{})", self.inner.width(), self.inner.height())
    }
}

fn profile_from(deltas: (u8, u8, u8), threshold: Option<f64>) -> PyResult<ModulationProfile> {
    let tau = threshold.unwrap_or(deltas.2 as f64 / 2.0);
    ModulationProfile::new(deltas.0, deltas.1, deltas.2, tau).map_err(value_err)
}

#[pyfunction]
fn state_probability(channels: u32, arrival_rate: f64, service_rate: f64, m: u32) -> PyResult<f64> {
    let cfg = DisplayQueueConfig::new(1, channels, arrival_rate, service_rate).map_err(value_err)?;
    queueing::state_probability(&cfg, m).map_err(value_err)
}

#[pyfunction]
fn idle_probability(channels: u32, arrival_rate: f64, service_rate: f64) -> PyResult<f64> {
    let cfg = DisplayQueueConfig::new(1, channels, arrival_rate, service_rate).map_err(value_err)?;
    queueing::idle_probability(&cfg).map_err(value_err)
}

#[pyfunction]
fn waiting_probability(channels: u32, arrival_rate: f64, service_rate: f64) -> PyResult<f64> {
    let cfg = DisplayQueueConfig::new(1, channels, arrival_rate, service_rate).map_err(value_err)?;
    queueing::waiting_probability(&cfg).map_err(value_err)
}

/// displays: list of (channels, arrival_rate) tuples.
#[pyfunction]
fn system_rejection_probability(
    displays: Vec<(u32, f64)>,
    service_rate: f64,
    mode: &str,
) -> PyResult<f64> {
    let sys = build_system(displays, service_rate)?;
    queueing::system_rejection_probability(&sys, parse_mode(mode)?).map_err(value_err)
}

#[pyfunction]
fn link_utilization(displays: Vec<(u32, f64)>, service_rate: f64, mode: &str) -> PyResult<f64> {
    let sys = build_system(displays, service_rate)?;
    queueing::link_utilization(&sys, parse_mode(mode)?).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (displays, service_rate, policy, seed, total_arrivals, queue_capacity=None, warmup_fraction=0.1))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    displays: Vec<(u32, f64)>,
    service_rate: f64,
    policy: &str,
    seed: u64,
    total_arrivals: u64,
    queue_capacity: Option<usize>,
    warmup_fraction: f64,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let sys = build_system(displays, service_rate)?;
    let params = SimParams {
        seed,
        total_arrivals,
        queue_capacity,
        warmup_fraction,
    };
    let m = des::simulate(&sys, parse_policy(policy)?, &params).map_err(value_err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("arrivals", m.arrivals)?;
    d.set_item("served", m.served)?;
    d.set_item("dropped", m.dropped)?;
    d.set_item("wait_probability", m.wait_probability)?;
    d.set_item("drop_probability", m.drop_probability)?;
    d.set_item("mean_wait_s", m.mean_wait_s)?;
    d.set_item("mean_queue_len", m.mean_queue_len)?;
    d.set_item("busy_fraction", m.busy_fraction)?;
    Ok(d.into())
}

#[pyfunction]
#[pyo3(signature = (reference, bits, rows=2, cols=4, deltas=(2, 0, 4), threshold=None))]
fn embed_bits(
    reference: &PyFrame,
    bits: Vec<bool>,
    rows: u32,
    cols: u32,
    deltas: (u8, u8, u8),
    threshold: Option<f64>,
) -> PyResult<PyFrame> {
    let layout = isc::make_layout(reference.inner.width(), reference.inner.height(), rows, cols)
        .map_err(value_err)?;
    let profile = profile_from(deltas, threshold)?;
    Ok(PyFrame {
        inner: isc::embed_bits(&reference.inner, &bits, &layout, &profile).map_err(value_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (reference, data, rows=2, cols=4, deltas=(2, 0, 4), threshold=None))]
fn extract_bits(
    reference: &PyFrame,
    data: &PyFrame,
    rows: u32,
    cols: u32,
    deltas: (u8, u8, u8),
    threshold: Option<f64>,
) -> PyResult<Vec<bool>> {
    let layout = isc::make_layout(reference.inner.width(), reference.inner.height(), rows, cols)
        .map_err(value_err)?;
    let profile = profile_from(deltas, threshold)?;
    isc::extract_bits(&reference.inner, &data.inner, &layout, &profile).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (frame, gain=1.0, offset=0, noise_sigma=0.0, seed=0))]
fn distort(frame: &PyFrame, gain: f64, offset: i32, noise_sigma: f64, seed: u64) -> PyResult<PyFrame> {
    let model = ChannelModel {
        gain,
        offset,
        noise_sigma,
        seed,
    };
    Ok(PyFrame {
        inner: isc::distort(&frame.inner, &model).map_err(value_err)?,
    })
}

/// Returns ([256 red counts], [256 green counts], [256 blue counts]).
#[pyfunction]
fn histogram(frame: &PyFrame) -> (Vec<u64>, Vec<u64>, Vec<u64>) {
    let h = isc::histogram(&frame.inner);
    (h.red.to_vec(), h.green.to_vec(), h.blue.to_vec())
}

#[pyfunction]
fn invisibility_report(
    py: Python<'_>,
    reference: &PyFrame,
    data: &PyFrame,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let r = isc::invisibility_report(&reference.inner, &data.inner).map_err(value_err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("max_mean_shift", r.max_mean_shift)?;
    d.set_item("mse", r.mse)?;
    d.set_item("psnr_db", r.psnr_db)?;
    d.set_item("green_unchanged", r.green_unchanged)?;
    Ok(d.into())
}

#[pyfunction]
fn stream_throughput(fps: f64, bits_per_frame: u32) -> f64 {
    isc::stream_throughput(fps, bits_per_frame)
}

#[pyfunction]
fn crc8(data: Vec<u8>) -> u8 {
    framing::crc8(&data)
}

#[pyfunction]
fn frame_payload(text: &str) -> PyResult<Vec<bool>> {
    framing::frame_payload(text).map_err(value_err)
}

#[pyfunction]
fn deframe_payload(bits: Vec<bool>) -> PyResult<String> {
    framing::deframe_payload(&bits).map_err(value_err)
}

#[pymodule]
fn siglink_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFrame>()?;
    m.add_function(wrap_pyfunction!(state_probability, m)?)?;
    m.add_function(wrap_pyfunction!(idle_probability, m)?)?;
    m.add_function(wrap_pyfunction!(waiting_probability, m)?)?;
    m.add_function(wrap_pyfunction!(system_rejection_probability, m)?)?;
    m.add_function(wrap_pyfunction!(link_utilization, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(embed_bits, m)?)?;
    m.add_function(wrap_pyfunction!(extract_bits, m)?)?;
    m.add_function(wrap_pyfunction!(distort, m)?)?;
    m.add_function(wrap_pyfunction!(histogram, m)?)?;
    m.add_function(wrap_pyfunction!(invisibility_report, m)?)?;
    m.add_function(wrap_pyfunction!(stream_throughput, m)?)?;
    m.add_function(wrap_pyfunction!(crc8, m)?)?;
    m.add_function(wrap_pyfunction!(frame_payload, m)?)?;
    m.add_function(wrap_pyfunction!(deframe_payload, m)?)?;
    Ok(())
}
