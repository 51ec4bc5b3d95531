use pyo3::prelude::*;
use pyo3::types::{IntoPyDict, PyDict, PyModule};

fn with_module(f: impl FnOnce(&Bound<'_, PyModule>)) {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "heston_is").unwrap();
        heston_is_py::register(&m).unwrap();
        f(&m);
    });
}

#[test]
fn kinds_and_constants() {
    with_module(|m| {
        let kinds: Vec<String> = m.getattr("estimator_kinds").unwrap().call0().unwrap().extract().unwrap();
        assert_eq!(kinds.len(), 17);
        let d = m.getattr("large_time_constants").unwrap().call0().unwrap();
        let d = d.cast::<PyDict>().unwrap();
        let nu: f64 = d.get_item("nu").unwrap().unwrap().extract().unwrap();
        assert!((nu - 20.55).abs() < 0.01, "{nu}");
    });
}

#[test]
fn price_and_errors() {
    with_module(|m| {
        let kw = PyDict::new(m.py());
        kw.set_item("n_paths", 2000).unwrap();
        kw.set_item("n_steps", 20).unwrap();
        let r = m.getattr("price").unwrap().call(("BS", 55.0), Some(&kw)).unwrap();
        let vr: f64 = r.getattr("var_reduction").unwrap().extract().unwrap();
        assert!(vr > 1.0);
        let err = m.getattr("price").unwrap().call(("Nope", 55.0), Some(&kw)).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(m.py()));
        let bad = m.getattr("HestonParams").unwrap().call((), Some(&[("rho", 1.5)].into_py_dict(m.py()).unwrap()));
        assert!(bad.is_err());
    });
}
