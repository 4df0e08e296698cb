//! Python bindings: geometry primitives, SAR deburst, dataset helpers and the pipeline commands.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use geovqa_core::config::PipelineConfig;
use geovqa_core::geo::{self, Geometry, WorldPoint};
use geovqa_core::{dataset, pipeline, sar, Error};

fn py_err(e: Error) -> PyErr {
    if e.is_validation() || matches!(e, Error::Domain(_) | Error::Degenerate(_)) {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Serializable value -> Python object through the json module.
fn to_py<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn points(coords: Vec<(f64, f64)>) -> Vec<WorldPoint> {
    coords.into_iter().map(|(x, y)| WorldPoint::new(x, y)).collect()
}

#[pyclass(name = "Extent", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyExtent {
    inner: geo::Extent,
}

#[pymethods]
impl PyExtent {
    #[new]
    fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> PyResult<Self> {
        Ok(Self { inner: geo::Extent::new(min_x, min_y, max_x, max_y).map_err(py_err)? })
    }

    #[getter]
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let e = &self.inner;
        (e.min_x, e.min_y, e.max_x, e.max_y)
    }

    fn area(&self) -> f64 {
        self.inner.area()
    }

    /// 3x3 grid cell label (`top-left` ... `bottom-right`) of a point.
    fn grid_cell(&self, x: f64, y: f64) -> PyResult<&'static str> {
        Ok(geo::grid_cell(&WorldPoint::new(x, y), &self.inner).map_err(py_err)?.label())
    }

    fn __repr__(&self) -> String {
        let (a, b, c, d) = self.bounds();
        format!("Extent({a}, {b}, {c}, {d})")
    }
}

#[pyclass(name = "Polygon", frozen)]
struct PyPolygon {
    inner: Geometry,
}

#[pymethods]
impl PyPolygon {
    #[new]
    #[pyo3(signature = (exterior, holes=None))]
    fn new(exterior: Vec<(f64, f64)>, holes: Option<Vec<Vec<(f64, f64)>>>) -> PyResult<Self> {
        let holes = holes.unwrap_or_default().into_iter().map(points).collect();
        let p = geo::Polygon::new(points(exterior), holes).map_err(py_err)?;
        Ok(Self { inner: Geometry::Polygon(p) })
    }

    fn area(&self) -> PyResult<f64> {
        geo::area(&self.inner).map_err(py_err)
    }

    fn centroid(&self) -> PyResult<(f64, f64)> {
        let c = geo::centroid(&self.inner).map_err(py_err)?;
        Ok((c.x, c.y))
    }

    /// Area of the part inside `extent`.
    fn clipped_area(&self, extent: PyExtent) -> PyResult<f64> {
        let clipped = geo::clip(&self.inner, &extent.inner);
        if clipped.is_empty() {
            return Ok(0.0);
        }
        geo::area(&clipped).map_err(py_err)
    }
}

/// Octagon sector label of `target` as seen from `reference`.
#[pyfunction]
fn octagon_sector(reference: (f64, f64), target: (f64, f64)) -> PyResult<&'static str> {
    let r = WorldPoint::new(reference.0, reference.1);
    let t = WorldPoint::new(target.0, target.1);
    Ok(geo::octagon_sector(&r, &t).map_err(py_err)?.label())
}

/// Removes black bands and duplicated burst rows. Returns `(vv, vh, layout)`.
#[pyfunction]
#[pyo3(signature = (vv, vh, black_factor=1.5))]
fn deburst(
    py: Python<'_>,
    vv: Vec<Vec<f32>>,
    vh: Vec<Vec<f32>>,
    black_factor: f64,
) -> PyResult<(Vec<Vec<f32>>, Vec<Vec<f32>>, Py<PyAny>)> {
    let plane = |rows: Vec<Vec<f32>>| -> PyResult<ndarray::Array2<f32>> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(PyValueError::new_err("rows of unequal length"));
        }
        let n = rows.len();
        ndarray::Array2::from_shape_vec((n, cols), rows.concat()).map_err(|e| PyValueError::new_err(e.to_string()))
    };
    let img = sar::SlcImage::new(plane(vv)?, plane(vh)?).map_err(py_err)?;
    let cfg = sar::DeburstConfig { black_factor, ..Default::default() };
    let out = py.detach(|| sar::deburst(&img, &cfg)).map_err(py_err)?;
    let rows = |a: &ndarray::Array2<f32>| a.rows().into_iter().map(|r| r.to_vec()).collect();
    Ok((rows(&out.vv), rows(&out.vh), to_py(py, &out.layout)?))
}

/// Amplitudes to decibels, `20 log10(max(a, eps))`.
#[pyfunction]
fn to_db(amplitude: Vec<f32>, eps: f64) -> Vec<f64> {
    sar::to_db(&amplitude, eps)
}

/// Train/val/test sizes by largest remainder.
#[pyfunction]
#[pyo3(signature = (n, ratios=(0.6, 0.2, 0.2)))]
fn split_sizes(n: usize, ratios: (f64, f64, f64)) -> PyResult<(usize, usize, usize)> {
    let [a, b, c] = dataset::split_sizes(n, [ratios.0, ratios.1, ratios.2]).map_err(py_err)?;
    Ok((a, b, c))
}

/// Top-k answer vocabulary as a dict with `answers`, `coverage`, `k` and `total`.
#[pyfunction]
fn build_vocab(py: Python<'_>, answers: Vec<String>, k: usize) -> PyResult<Py<PyAny>> {
    let v = dataset::build_vocab(answers.iter().map(String::as_str), k).map_err(py_err)?;
    to_py(py, &v)
}

/// Writes the miniworld inputs and returns the config path.
#[pyfunction]
#[pyo3(signature = (directory, seed=42))]
fn write_miniworld(directory: PathBuf, seed: u64) -> PyResult<PathBuf> {
    geovqa_core::fixture::write_miniworld(&directory, seed).map_err(py_err)
}

/// The pipeline commands bound to one config document.
#[pyclass(name = "Pipeline", frozen)]
struct PyPipeline {
    cfg: PipelineConfig,
}

#[pymethods]
impl PyPipeline {
    #[new]
    #[pyo3(signature = (config, output=None))]
    fn new(config: PathBuf, output: Option<PathBuf>) -> PyResult<Self> {
        let mut cfg = PipelineConfig::from_file(&config).map_err(py_err)?;
        if let Some(out) = output {
            cfg.output_dir = std::path::absolute(out)?;
        }
        Ok(Self { cfg })
    }

    #[getter]
    fn config_hash(&self) -> PyResult<String> {
        self.cfg.hash().map_err(py_err)
    }

    #[getter]
    fn output_dir(&self) -> PathBuf {
        self.cfg.output()
    }

    fn validate(&self, py: Python<'_>) -> PyResult<()> {
        py.detach(|| self.cfg.validate()).map_err(py_err)
    }

    /// Runs one command (`tile`, `sar-prep`, `generate`, `balance`, `split`, `export`, `stats`
    /// or `all`) and returns its summary.
    fn run(&self, py: Python<'_>, command: &str) -> PyResult<Py<PyAny>> {
        let cfg = &self.cfg;
        let summary = py
            .detach(|| -> geovqa_core::Result<serde_json::Value> {
                Ok(match command {
                    "tile" => serde_json::json!({"patches": pipeline::tile(cfg)?.patches.len()}),
                    "sar-prep" => json(&pipeline::sar_prep(cfg, None)?),
                    "generate" => serde_json::json!({"candidates": pipeline::generate(cfg)?.len()}),
                    "balance" => json(&pipeline::run_balance(cfg)?.1),
                    "split" => json(&pipeline::run_split(cfg)?.sizes),
                    "export" => json(&pipeline::run_export(cfg)?),
                    "stats" => json(&pipeline::run_stats(cfg)?),
                    "all" => json(&pipeline::run_all(cfg)?),
                    other => return Err(Error::Config(format!("unknown command '{other}'"))),
                })
            })
            .map_err(py_err)?;
        to_py(py, &summary)
    }
}

#[pymodule]
fn geovqa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExtent>()?;
    m.add_class::<PyPolygon>()?;
    m.add_class::<PyPipeline>()?;
    m.add_function(wrap_pyfunction!(octagon_sector, m)?)?;
    m.add_function(wrap_pyfunction!(deburst, m)?)?;
    m.add_function(wrap_pyfunction!(to_db, m)?)?;
    m.add_function(wrap_pyfunction!(split_sizes, m)?)?;
    m.add_function(wrap_pyfunction!(build_vocab, m)?)?;
    m.add_function(wrap_pyfunction!(write_miniworld, m)?)?;
    Ok(())
}
