use pycontmeas::pycontmeas;
use pyo3::prelude::*;
use pyo3::types::PyDict;

#[test]
fn module_runs_in_embedded_interpreter() {
    pyo3::append_to_inittab!(pycontmeas);
    Python::initialize();
    Python::attach(|py| {
        let globals = PyDict::new(py);
        py.run(
            c"
import math, pycontmeas as cm
rabi = cm.System(-0.5, 0.5, math.pi, 0.0, 0.5, 0.5, 0.0)
traj = cm.integrate_rpi(rabi, cm.Readout(0.25, 0.5, [0.0, 0.0]))
p2 = traj.final_p2
stats = cm.run_ensemble(cm.System.reference(2.0), 200, 3, sampler='micro')
",
            Some(&globals),
            None,
        )
        .unwrap();
        let p2: f64 = globals.get_item("p2").unwrap().unwrap().extract().unwrap();
        assert!((p2 - 1.0).abs() < 1e-8);
        let stats = globals.get_item("stats").unwrap().unwrap();
        let n: usize = stats.get_item("n").unwrap().extract().unwrap();
        assert_eq!(n, 200);
    });
}
