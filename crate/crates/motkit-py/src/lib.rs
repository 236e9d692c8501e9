use pyo3::prelude::*;

#[pymodule]
fn motkit_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
