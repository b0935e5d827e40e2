//! Python bindings: rotations, forward kinematics, the camera model,
//! metrics, synthetic clips, and training/evaluation of the three variants.
//!
//! Arrays cross the boundary as nested lists of floats. Structured results
//! (reports, clips, loss curves) come back as dicts.

use std::path::PathBuf;

use nalgebra::{Matrix3, Vector3};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use motion_prior::camera::{self, CameraIntrinsics, WeakCamera};
use motion_prior::gradcore::checkpoint;
use motion_prior::harness::formats::{run_manifest, to_json};
use motion_prior::harness::gradcheck::run_gradient_checks;
use motion_prior::harness::train::{self, predict_keypoints, run_ablation, run_variant};
use motion_prior::metrics::{self, JointTrajectory};
use motion_prior::models::ObsFrame;
use motion_prior::rot3::{self, AxisAngle, RotMat, RotationSixD};
use motion_prior::skeleton::{default_tree, forward_kinematics, PoseFrame, ShapeParams, NUM_BETAS, NUM_JOINTS};
use motion_prior::synthmotion::{self, make_dataset, MotionFamily, MotionFamilyConfig, TrainingClip};
use motion_prior::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(m) => PyIOError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = to_json(v).map_err(py_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn mat_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn rotmat(rows: [[f64; 3]; 3]) -> RotMat {
    RotMat(Matrix3::from_fn(|i, j| rows[i][j]))
}

fn points(v: &[[f64; 3]]) -> Vec<Vector3<f64>> {
    v.iter().map(|p| Vector3::from(*p)).collect()
}

fn trajectory(frames: Vec<Vec<[f64; 3]>>, fps: f64) -> PyResult<JointTrajectory> {
    JointTrajectory::new(frames.iter().map(|f| points(f)).collect(), fps).map_err(py_err)
}

fn intrinsics(focal: f64, res: f64) -> PyResult<CameraIntrinsics> {
    CameraIntrinsics::new(focal, res).map_err(py_err)
}

#[pyfunction]
fn sixd_to_rotmat(x: [f64; 6]) -> PyResult<[[f64; 3]; 3]> {
    Ok(mat_rows(&rot3::sixd_to_rotmat(&RotationSixD::from_slice(&x)).map_err(py_err)?.0))
}

#[pyfunction]
fn rotmat_to_sixd(r: [[f64; 3]; 3]) -> [f64; 6] {
    rot3::rotmat_to_sixd(&rotmat(r)).to_array()
}

#[pyfunction]
fn axis_angle_to_rotmat(v: [f64; 3]) -> [[f64; 3]; 3] {
    mat_rows(&rot3::axis_angle_to_rotmat(&AxisAngle(Vector3::from(v))).0)
}

#[pyfunction]
fn rotmat_to_axis_angle(r: [[f64; 3]; 3]) -> [f64; 3] {
    rot3::rotmat_to_axis_angle(&rotmat(r)).0.into()
}

#[pyfunction]
fn rotation_angle(r: [[f64; 3]; 3]) -> f64 {
    rot3::rotation_angle(&rotmat(r))
}

/// Joint positions (meters) for 24 axis-angle joint rotations.
#[pyfunction]
#[pyo3(signature = (pose, beta=None, trans=None))]
fn fk(pose: Vec<[f64; 3]>, beta: Option<[f64; NUM_BETAS]>, trans: Option<[f64; 3]>) -> PyResult<Vec<[f64; 3]>> {
    if pose.len() != NUM_JOINTS {
        return Err(PyValueError::new_err(format!("pose needs {NUM_JOINTS} joints, got {}", pose.len())));
    }
    let frame = PoseFrame {
        joints: std::array::from_fn(|j| AxisAngle(Vector3::from(pose[j]))),
        trans: Vector3::from(trans.unwrap_or_default()),
    };
    let shape = ShapeParams { beta: beta.unwrap_or_default() };
    Ok(forward_kinematics(&default_tree(), &frame, &shape).iter().map(|p| [p.x, p.y, p.z]).collect())
}

#[pyfunction]
#[pyo3(signature = (s, tx, ty, focal=camera::DEFAULT_FOCAL, res=camera::DEFAULT_RES))]
fn recover_translation(s: f64, tx: f64, ty: f64, focal: f64, res: f64) -> PyResult<[f64; 3]> {
    let t = camera::recover_translation(&WeakCamera { s, tx, ty }, &intrinsics(focal, res)?).map_err(py_err)?;
    Ok(t.into())
}

/// Pixel coordinates of `points + trans`.
#[pyfunction]
#[pyo3(signature = (points_3d, trans, focal=camera::DEFAULT_FOCAL, res=camera::DEFAULT_RES))]
fn project(points_3d: Vec<[f64; 3]>, trans: [f64; 3], focal: f64, res: f64) -> PyResult<Vec<[f64; 2]>> {
    let uv = camera::project(&points(&points_3d), &intrinsics(focal, res)?, &Vector3::from(trans)).map_err(py_err)?;
    Ok(uv.iter().map(|p| [p.x, p.y]).collect())
}

#[pyfunction]
fn mpjpe(pred: Vec<Vec<[f64; 3]>>, gt: Vec<Vec<[f64; 3]>>) -> PyResult<f64> {
    metrics::mpjpe(&trajectory(pred, 25.0)?, &trajectory(gt, 25.0)?).map_err(py_err)
}

#[pyfunction]
fn pa_mpjpe(pred: Vec<Vec<[f64; 3]>>, gt: Vec<Vec<[f64; 3]>>) -> PyResult<f64> {
    metrics::pa_mpjpe(&trajectory(pred, 25.0)?, &trajectory(gt, 25.0)?).map_err(py_err)
}

#[pyfunction]
fn acceleration(traj: Vec<Vec<[f64; 3]>>) -> PyResult<f64> {
    metrics::acceleration(&trajectory(traj, 25.0)?).map_err(py_err)
}

#[pyfunction]
fn acceleration_error(pred: Vec<Vec<[f64; 3]>>, gt: Vec<Vec<[f64; 3]>>) -> PyResult<f64> {
    metrics::acceleration_error(&trajectory(pred, 25.0)?, &trajectory(gt, 25.0)?).map_err(py_err)
}

fn family(name: &str) -> PyResult<MotionFamily> {
    MotionFamily::ALL
        .into_iter()
        .find(|f| f.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown motion family {name:?}")))
}

fn clip_dict<'py>(py: Python<'py>, clip: &TrainingClip) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let kp3d: Vec<Vec<[f64; 3]>> = clip.gt_keypoints_3d.iter().map(|f| f.iter().map(|p| [p.x, p.y, p.z]).collect()).collect();
    let kp2d: Vec<Vec<[f64; 2]>> = clip.gt_keypoints_2d.iter().map(|f| f.iter().map(|p| [p.x, p.y]).collect()).collect();
    let obs: Vec<Vec<[f64; 3]>> = clip.observations.iter().map(|f| f.to_vec()).collect();
    let pose: Vec<Vec<[f64; 3]>> =
        clip.gt_motion.frames.iter().map(|f| f.joints.iter().map(|a| a.0.into()).collect()).collect();
    let trans: Vec<[f64; 3]> = clip.gt_motion.frames.iter().map(|f| f.trans.into()).collect();
    let cams: Vec<[f64; 3]> = clip.gt_weak_cam.iter().map(|c| [c.s, c.tx, c.ty]).collect();
    d.set_item("keypoints_3d", kp3d)?;
    d.set_item("keypoints_2d", kp2d)?;
    d.set_item("observations", obs)?;
    d.set_item("pose", pose)?;
    d.set_item("trans", trans)?;
    d.set_item("weak_cam", cams)?;
    d.set_item("beta", clip.gt_motion.shape.beta.to_vec())?;
    d.set_item("seed", clip.seed)?;
    Ok(d)
}

/// One synthetic clip of a motion family (`walk-like`, `wave-like`,
/// `idle-sway`) with observations at `noise_px` pixel noise.
#[pyfunction]
#[pyo3(signature = (family_name, frames=16, seed=0, noise_px=3.0))]
fn synthesize_clip<'py>(
    py: Python<'py>,
    family_name: &str,
    frames: usize,
    seed: u64,
    noise_px: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = MotionFamilyConfig::random(family(family_name)?, synthmotion::DEFAULT_FPS, seed);
    let clip = synthmotion::synthesize_clip(&cfg, frames, &CameraIntrinsics::default(), noise_px, seed).map_err(py_err)?;
    clip_dict(py, &clip)
}

/// Training configuration. Keyword arguments use the config-file keys,
/// e.g. `TrainConfig(iterations=50, variant="sep_t", lambda_reg=0)`.
#[pyclass(name = "TrainConfig", from_py_object)]
#[derive(Clone)]
struct PyTrainConfig {
    inner: motion_prior::harness::TrainConfig,
}

#[pymethods]
impl PyTrainConfig {
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut text = String::new();
        if let Some(kw) = overrides {
            for (k, v) in kw.iter() {
                let v = match v.extract::<bool>() {
                    Ok(b) => b.to_string(),
                    Err(_) => v.str()?.to_string(),
                };
                text.push_str(&format!("{} = {}\n", k.str()?, v));
            }
        }
        Ok(Self { inner: motion_prior::harness::TrainConfig::parse(&text).map_err(py_err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: motion_prior::harness::TrainConfig::load(&path).map_err(py_err)? })
    }

    fn to_text(&self) -> String {
        self.inner.to_canonical_string()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    fn __getitem__(&self, key: &str) -> PyResult<String> {
        self.inner.entries().remove(key).ok_or_else(|| PyValueError::new_err(format!("unknown key {key:?}")))
    }

    fn __repr__(&self) -> String {
        format!("TrainConfig(variant={}, iterations={}, seed={})", self.inner.variant, self.inner.iterations, self.inner.seed)
    }
}

/// A trained generator/discriminator pair with its report and curves.
#[pyclass(name = "TrainedModel")]
struct PyTrainedModel {
    run: train::VariantRun,
}

#[pymethods]
impl PyTrainedModel {
    #[getter]
    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.run.report)
    }

    #[getter]
    fn curves<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.run.outcome.curves)
    }

    /// Root-relative keypoints (meters) for a `T × 24 × 3` observation window.
    fn predict(&self, observations: Vec<[[f64; 3]; NUM_JOINTS]>) -> PyResult<Vec<Vec<[f64; 3]>>> {
        let clip_obs: Vec<ObsFrame> = observations;
        let model = &self.run.outcome.model;
        let out = model.generator.predict(&model.store, &clip_obs).map_err(py_err)?;
        let tree = default_tree();
        Ok(out
            .pose_rotmats
            .iter()
            .map(|r| {
                let pos = motion_prior::skeleton::forward_kinematics_rotmats(&tree, r, &out.shape, &Vector3::zeros());
                pos.iter().map(|p| [p.x, p.y, p.z]).collect()
            })
            .collect())
    }

    /// Metrics (millimeters) on the evaluation split of `config`'s dataset.
    fn evaluate<'py>(&self, py: Python<'py>, config: &PyTrainConfig) -> PyResult<Bound<'py, PyAny>> {
        let data = make_dataset(&config.inner.dataset()).map_err(py_err)?;
        let eval = train::evaluate(&self.run.outcome.model, &data.eval).map_err(py_err)?;
        json_to_py(py, &serde_json::json!({ "metrics": eval.metrics, "observation_oracle": eval.observation_oracle, "clips": eval.clips }))
    }

    /// Root-relative predicted keypoints for each evaluation clip of
    /// `config`'s dataset, paired with the ground truth.
    fn eval_predictions(&self, config: &PyTrainConfig) -> PyResult<Vec<(Vec<Vec<[f64; 3]>>, Vec<Vec<[f64; 3]>>)>> {
        let data = make_dataset(&config.inner.dataset()).map_err(py_err)?;
        let flat = |f: &[[Vector3<f64>; NUM_JOINTS]]| -> Vec<Vec<[f64; 3]>> {
            f.iter().map(|fr| fr.iter().map(|p| [p.x, p.y, p.z]).collect()).collect()
        };
        data.eval
            .iter()
            .map(|c| Ok((flat(&predict_keypoints(&self.run.outcome.model, c).map_err(py_err)?), flat(&c.gt_keypoints_3d))))
            .collect()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let m = &self.run.outcome.model;
        checkpoint::save(&path, &m.store, self.run.report.seed, self.run.report.iterations as u64, run_manifest(&self.run))
            .map_err(py_err)
    }
}

/// Trains and evaluates one variant.
#[pyfunction]
fn train_variant(py: Python<'_>, config: PyTrainConfig) -> PyResult<PyTrainedModel> {
    let cfg = config.inner;
    let run = py
        .detach(move || make_dataset(&cfg.dataset()).and_then(|d| run_variant(&cfg, &d)))
        .map_err(py_err)?;
    Ok(PyTrainedModel { run })
}

/// Trains all three variants on shared data; returns their reports.
#[pyfunction]
fn ablate<'py>(py: Python<'py>, config: PyTrainConfig) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config.inner;
    let runs = py.detach(move || run_ablation(&cfg, false)).map_err(py_err)?;
    let reports: Vec<_> = runs.iter().map(|r| &r.report).collect();
    json_to_py(py, &reports)
}

/// Finite-difference gradient checks; one dict per checked block.
#[pyfunction]
#[pyo3(signature = (seed=0))]
fn check_gradients<'py>(py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyList>> {
    let checks = run_gradient_checks(seed).map_err(py_err)?;
    let out = PyList::empty(py);
    for c in &checks {
        let d = json_to_py(py, c)?;
        d.set_item("passed", c.passed())?;
        out.append(d)?;
    }
    Ok(out)
}

#[pymodule]
fn motion_prior_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds every function, class and constant to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NUM_JOINTS", NUM_JOINTS)?;
    m.add("NUM_BETAS", NUM_BETAS)?;
    m.add("FAMILIES", MotionFamily::ALL.map(|f| f.name()).to_vec())?;
    m.add_function(wrap_pyfunction!(sixd_to_rotmat, m)?)?;
    m.add_function(wrap_pyfunction!(rotmat_to_sixd, m)?)?;
    m.add_function(wrap_pyfunction!(axis_angle_to_rotmat, m)?)?;
    m.add_function(wrap_pyfunction!(rotmat_to_axis_angle, m)?)?;
    m.add_function(wrap_pyfunction!(rotation_angle, m)?)?;
    m.add_function(wrap_pyfunction!(fk, m)?)?;
    m.add_function(wrap_pyfunction!(recover_translation, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(mpjpe, m)?)?;
    m.add_function(wrap_pyfunction!(pa_mpjpe, m)?)?;
    m.add_function(wrap_pyfunction!(acceleration, m)?)?;
    m.add_function(wrap_pyfunction!(acceleration_error, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_clip, m)?)?;
    m.add_function(wrap_pyfunction!(train_variant, m)?)?;
    m.add_function(wrap_pyfunction!(ablate, m)?)?;
    m.add_function(wrap_pyfunction!(check_gradients, m)?)?;
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyTrainedModel>()?;
    Ok(())
}
