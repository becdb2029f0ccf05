//! Python bindings for the sparse edge-coding engine: the image pipeline,
//! log-Gabor bank, matching pursuit and the edge-statistics priors.
//!
//! Build with `cargo build --release -p sparselets-py`; the resulting
//! `libsparselets_py.so` imports as the module `sparselets_py` once renamed
//! onto the Python path (see `python/smoke_test.py`).

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use sparselets_core::imagecore;
use sparselets_core::loggabor::{AtomAddress, BankParams, LogGaborBank};
use sparselets_core::priors;
use sparselets_core::pursuit::{self, PursuitParams};

fn err(e: sparselets_core::Error) -> PyErr {
    match &e {
        sparselets_core::Error::Io { .. } | sparselets_core::Error::ImageDecode { .. } => {
            PyIOError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// A square grayscale image.
#[pyclass(name = "Image", from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: imagecore::Image,
}

#[pymethods]
impl PyImage {
    /// Builds an image from row-major pixel data.
    #[new]
    fn new(size: usize, data: Vec<f64>) -> PyResult<Self> {
        Ok(PyImage {
            inner: imagecore::Image::from_vec(size, data).map_err(err)?,
        })
    }

    /// Loads a grayscale image file, central-cropped and mean-subtracted.
    #[staticmethod]
    fn load(path: &str, size: usize) -> PyResult<Self> {
        Ok(PyImage {
            inner: imagecore::load_image(path, size).map_err(err)?,
        })
    }

    #[staticmethod]
    fn zeros(size: usize) -> Self {
        PyImage {
            inner: imagecore::Image::zeros(size),
        }
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn energy(&self) -> f64 {
        self.inner.energy()
    }

    /// Spectral whitening `W(f) = f·exp(−(f/f0)^steepness)`; `f0` defaults
    /// to 0.45 of Nyquist.
    #[pyo3(signature = (f0=None, steepness=4.0))]
    fn whiten(&self, f0: Option<f64>, steepness: f64) -> PyResult<Self> {
        let params = imagecore::WhiteningParams {
            f0: f0.unwrap_or(0.45 * self.inner.size() as f64 / 2.0),
            steepness,
        };
        Ok(PyImage {
            inner: imagecore::whiten(&self.inner, &params).map_err(err)?,
        })
    }

    /// Circular window with a raised-cosine rim taper.
    fn circular_mask(&self) -> Self {
        PyImage {
            inner: imagecore::apply_circular_mask(&self.inner),
        }
    }

    fn save_pgm(&self, path: &str) -> PyResult<f64> {
        imagecore::save_pgm16(&self.inner, path).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Image({0}x{0})", self.inner.size())
    }
}

/// The log-Gabor filter bank for one image size.
#[pyclass(name = "Bank")]
struct PyBank {
    inner: LogGaborBank,
}

#[pymethods]
impl PyBank {
    #[new]
    #[pyo3(signature = (size, n_scales=None, n_orientations=24, b_f=0.4,
                        b_theta=std::f64::consts::PI / 8.0, scale_ratio=2.0,
                        f_max=0.45, orientations=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        size: usize,
        n_scales: Option<usize>,
        n_orientations: usize,
        b_f: f64,
        b_theta: f64,
        scale_ratio: f64,
        f_max: f64,
        orientations: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let params = BankParams {
            n_scales: n_scales.unwrap_or_else(|| {
                sparselets_core::loggabor::max_feasible_scales(f_max, scale_ratio, size).min(8)
            }),
            n_orientations,
            b_f,
            b_theta,
            scale_ratio,
            f_max,
            orientations,
        };
        Ok(PyBank {
            inner: LogGaborBank::build(params, size).map_err(err)?,
        })
    }

    #[getter]
    fn image_size(&self) -> usize {
        self.inner.image_size()
    }

    #[getter]
    fn n_scales(&self) -> usize {
        self.inner.params().n_scales
    }

    #[getter]
    fn n_orientations(&self) -> usize {
        self.inner.params().n_orientations
    }

    /// Total coefficient count M of the pyramid.
    #[getter]
    fn total_coefficients(&self) -> usize {
        self.inner.total_coefficients()
    }

    fn orientation_angles(&self) -> Vec<f64> {
        self.inner.params().orientation_angles()
    }

    fn wavelength(&self, scale: usize) -> f64 {
        self.inner.params().wavelength(scale)
    }

    /// Spatial image `Re(coeff·Φ)` of one atom.
    #[pyo3(signature = (scale, orientation, x, y, coeff_re=1.0, coeff_im=0.0))]
    fn synthesize_atom(
        &self,
        scale: usize,
        orientation: usize,
        x: usize,
        y: usize,
        coeff_re: f64,
        coeff_im: f64,
    ) -> PyResult<PyImage> {
        let img = self
            .inner
            .synthesize_atom(
                &AtomAddress {
                    scale,
                    orientation,
                    x,
                    y,
                },
                num_complex::Complex64::new(coeff_re, coeff_im),
            )
            .map_err(err)?;
        Ok(PyImage { inner: img })
    }

    fn __repr__(&self) -> String {
        format!(
            "Bank({} scales x {} orientations at {}²)",
            self.inner.params().n_scales,
            self.inner.params().n_orientations,
            self.inner.image_size()
        )
    }
}

/// Result of a pursuit run.
#[pyclass(name = "EdgeList", from_py_object)]
#[derive(Clone)]
struct PyEdgeList {
    inner: pursuit::EdgeList,
}

#[pymethods]
impl PyEdgeList {
    /// Edges as `(x, y, scale, orientation, theta, coeff_re, coeff_im)`
    /// tuples in extraction order.
    fn edges(&self) -> Vec<(usize, usize, usize, usize, f64, f64, f64)> {
        let thetas = self.inner.thetas();
        self.inner
            .edges
            .iter()
            .zip(thetas)
            .map(|(e, t)| (e.x, e.y, e.scale, e.orientation, t, e.coeff.re, e.coeff.im))
            .collect()
    }

    /// Residual energy after each step, from the coefficient identity.
    fn energy_curve(&self, alpha: f64) -> Vec<f64> {
        pursuit::energy_curve(&self.inner, alpha)
    }

    #[getter]
    fn initial_energy(&self) -> f64 {
        self.inner.initial_energy
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.inner.steps.len()
    }

    fn repeat_count(&self) -> usize {
        self.inner.repeat_count()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyEdgeList {
            inner: pursuit::EdgeList::from_json(text).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.edges.len()
    }
}

/// Greedy matching-pursuit extraction over the bank.
#[pyfunction]
#[pyo3(signature = (img, bank, alpha=0.8, max_edges=2048, energy_threshold=0.03))]
fn extract(
    img: &PyImage,
    bank: &PyBank,
    alpha: f64,
    max_edges: usize,
    energy_threshold: f64,
) -> PyResult<PyEdgeList> {
    let params = PursuitParams {
        alpha,
        max_edges,
        energy_threshold,
        ..PursuitParams::default()
    };
    Ok(PyEdgeList {
        inner: pursuit::extract(&img.inner, &bank.inner, &params).map_err(err)?,
    })
}

/// Linear reconstruction Σ Re(s_i·Φ_i).
#[pyfunction]
fn reconstruct(edges: &PyEdgeList, bank: &PyBank) -> PyResult<PyImage> {
    Ok(PyImage {
        inner: pursuit::reconstruct(&edges.inner, &bank.inner).map_err(err)?,
    })
}

/// Circle-in-noise stimulus; returns the image and the number of circle
/// atoms planted.
#[pyfunction]
#[pyo3(signature = (bank, radius, n_clutter=0, seed=0, scale_lo=1, scale_hi=3))]
fn make_circle_in_noise(
    bank: &PyBank,
    radius: f64,
    n_clutter: usize,
    seed: u64,
    scale_lo: usize,
    scale_hi: usize,
) -> PyResult<(PyImage, usize)> {
    let spec = imagecore::SyntheticStimulusSpec {
        radius,
        n_clutter,
        clutter_scale_range: (scale_lo, scale_hi),
        seed,
    };
    let (img, planted) =
        imagecore::circle_in_noise_with_ground_truth(&spec, &bank.inner).map_err(err)?;
    Ok((PyImage { inner: img }, planted.len() - n_clutter))
}

/// Modulus-weighted orientation histogram over edge lists.
#[pyfunction]
#[pyo3(signature = (edge_lists, n_bins=24, modulus_weighted=true))]
fn orientation_histogram(
    edge_lists: Vec<PyEdgeList>,
    n_bins: usize,
    modulus_weighted: bool,
) -> PyResult<Vec<f64>> {
    let lists: Vec<pursuit::EdgeList> = edge_lists.into_iter().map(|l| l.inner).collect();
    Ok(priors::orientation_stats(&lists, n_bins, modulus_weighted)
        .map_err(err)?
        .weights)
}

/// Inverse-CDF equalized orientation set from per-bin weights.
#[pyfunction]
fn equalize_orientations(weights: Vec<f64>, n_orientations: usize) -> PyResult<Vec<f64>> {
    let hist = priors::OrientationHistogram {
        n_bins: weights.len(),
        weights,
        modulus_weighted: true,
    };
    priors::equalize_orientations(&hist, n_orientations).map_err(err)
}

/// Chevron co-occurrence map marginalized to (ψ, θ), as occurrence ratios
/// against a uniform prior. Returns a flat `n_psi × n_theta` row-major list.
#[pyfunction]
#[pyo3(signature = (edge_lists, n_psi=24, n_theta=24, modulus_weighted=true))]
fn chevron_map(
    edge_lists: Vec<PyEdgeList>,
    n_psi: usize,
    n_theta: usize,
    modulus_weighted: bool,
) -> PyResult<Vec<f64>> {
    let lists: Vec<pursuit::EdgeList> = edge_lists.into_iter().map(|l| l.inner).collect();
    let binning = priors::ChevronBinning {
        n_psi,
        n_theta,
        ..priors::ChevronBinning::default()
    };
    Ok(priors::chevron_stats(&lists, &binning, modulus_weighted)
        .map_err(err)?
        .marginal_ratio())
}

/// Pursuit with the co-occurrence prediction term; `prior_lists` supply the
/// chevron statistics. `eta = 0` reproduces plain extraction exactly.
#[pyfunction]
#[pyo3(signature = (img, bank, prior_lists, alpha=0.8, max_edges=2048,
                    energy_threshold=0.03, eta=0.15))]
fn extract_with_prior(
    img: &PyImage,
    bank: &PyBank,
    prior_lists: Vec<PyEdgeList>,
    alpha: f64,
    max_edges: usize,
    energy_threshold: f64,
    eta: f64,
) -> PyResult<PyEdgeList> {
    let lists: Vec<pursuit::EdgeList> = prior_lists.into_iter().map(|l| l.inner).collect();
    let prior =
        priors::chevron_stats(&lists, &priors::ChevronBinning::default(), true).map_err(err)?;
    let pparams = PursuitParams {
        alpha,
        max_edges,
        energy_threshold,
        ..PursuitParams::default()
    };
    let cparams = priors::CoocParams {
        eta,
        ..priors::CoocParams::default()
    };
    Ok(PyEdgeList {
        inner: priors::extract_with_prior(&img.inner, &bank.inner, &prior, &pparams, &cparams)
            .map_err(err)?,
    })
}

#[pymodule]
fn sparselets_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyBank>()?;
    m.add_class::<PyEdgeList>()?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(make_circle_in_noise, m)?)?;
    m.add_function(wrap_pyfunction!(orientation_histogram, m)?)?;
    m.add_function(wrap_pyfunction!(equalize_orientations, m)?)?;
    m.add_function(wrap_pyfunction!(chevron_map, m)?)?;
    m.add_function(wrap_pyfunction!(extract_with_prior, m)?)?;
    Ok(())
}
