use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyDict>)>(f: F) {
    Python::attach(|py| {
        let m = PyModule::new(py, "motion_prior_py").unwrap();
        motion_prior_py::register(&m).unwrap();
        let locals = PyDict::new(py);
        locals.set_item("mp", m).unwrap();
        f(py, &locals);
    });
}

fn run(py: Python<'_>, locals: &Bound<'_, PyDict>, code: &str) {
    let code = std::ffi::CString::new(code).unwrap();
    py.run(&code, Some(locals), None).unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn rotations_round_trip() {
    with_module(|py, l| {
        run(py, l, "import math\nr = mp.axis_angle_to_rotmat([0.3, -0.2, 0.5])\nv = mp.rotmat_to_axis_angle(r)\nassert max(abs(a - b) for a, b in zip(v, [0.3, -0.2, 0.5])) < 1e-12\n");
        run(py, l, "r6 = mp.sixd_to_rotmat(mp.rotmat_to_sixd(r))\nassert max(abs(r6[i][j] - r[i][j]) for i in range(3) for j in range(3)) < 1e-12\n");
    });
}

#[test]
fn errors_become_python_exceptions() {
    with_module(|py, l| {
        run(py, l, "try:\n    mp.recover_translation(0.0, 0.0, 0.0)\n    ok = False\nexcept ValueError:\n    ok = True\nassert ok\n");
        run(py, l, "try:\n    mp.TrainConfig(iterations='many')\n    ok = False\nexcept ValueError:\n    ok = True\nassert ok\n");
        run(py, l, "try:\n    mp.synthesize_clip('dance')\n    ok = False\nexcept ValueError:\n    ok = True\nassert ok\n");
    });
}

#[test]
fn short_training_run() {
    with_module(|py, l| {
        run(py, l, "cfg = mp.TrainConfig(clips=6, real_pool=4, iterations=3, variant='baseline')\nm = mp.train_variant(cfg)\nrep = m.report\nassert rep['variant'] == 'baseline' and rep['iterations'] == 3\nassert abs(m.evaluate(cfg)['metrics']['mpjpe'] - rep['mpjpe']) < 1e-9\nassert len(m.curves) == 3\n");
    });
}
