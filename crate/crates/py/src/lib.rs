use pyo3::prelude::*;

#[pymodule]
fn adtune_rs(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
