use std::ffi::CString;

use prefsynth::prefsynth;
use pyo3::prelude::*;

fn run(code: &str) -> PyResult<()> {
    Python::attach(|py| py.run(&CString::new(code).unwrap(), None, None))
}

#[test]
fn module_through_the_interpreter() {
    pyo3::append_to_inittab!(prefsynth);
    Python::initialize();
    run(r#"
import prefsynth
m = prefsynth.Model.two_road()
iwv = prefsynth.IntervalWeightVector.parse("0.2:0.8,0.2:0.8")
r = prefsynth.synthesize(m, "dist:min,risk:min", iwv)
assert r["penalty"] == 0, r
assert r["multiStrategy"]["s0"] == ["short", "long"], r
assert prefsynth.compute_bounds(m, "dist:min,risk:min", iwv) == ([1.0, 0.0], [2.0, 1.0])
try:
    prefsynth.Model.from_grid("S#D")
except prefsynth.PrefsynthError as e:
    assert "unreachable" in str(e)
else:
    raise AssertionError("expected an error")
try:
    prefsynth.synthesize(m, "dist:min,risk:min", iwv, scope="everywhere")
except ValueError:
    pass
else:
    raise AssertionError("expected an error")
"#)
    .unwrap();
}
