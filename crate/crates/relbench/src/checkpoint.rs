//! Network checkpoints: a directory with one TNSR file per parameter
//! tensor (`conv1.weight.tnsr`, ..., `fc.bias.tnsr`).

use std::fs;
use std::path::Path;

use relbench_core::nn::{param_shapes, ToyNet};
use relbench_core::Tensor;

use crate::tnsr::{load_tensor, save_tensor};
use crate::{Error, Result};

pub fn save_checkpoint(net: &ToyNet<f32>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let shapes = param_shapes(net.in_channels(), net.classes());
    for ((name, dims), p) in shapes.into_iter().zip(net.params()) {
        save_tensor(&Tensor::new(dims, p.to_vec())?, dir.join(format!("{name}.tnsr")))?;
    }
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<ToyNet<f32>> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("checkpoint {} does not exist", dir.display())));
    }
    let conv1 = load_tensor(dir.join("conv1.weight.tnsr"))?;
    let fc = load_tensor(dir.join("fc.weight.tnsr"))?;
    let (in_channels, classes) = match (conv1.dims(), fc.dims()) {
        ([_, c, 3, 3], [k, _]) => (*c, *k),
        _ => {
            return Err(Error::MalformedHeader(format!(
                "unexpected parameter shapes {:?} and {:?} in {}",
                conv1.dims(),
                fc.dims(),
                dir.display()
            )))
        }
    };
    let mut params: [Vec<f32>; 6] = Default::default();
    for ((name, dims), slot) in param_shapes(in_channels, classes).into_iter().zip(&mut params) {
        let t = load_tensor(dir.join(format!("{name}.tnsr")))?;
        if t.dims() != dims.as_slice() {
            return Err(relbench_core::Error::DimMismatch(format!(
                "{name}: expected {dims:?}, found {:?}",
                t.dims()
            ))
            .into());
        }
        *slot = t.into_parts().1;
    }
    Ok(ToyNet::from_params(in_channels, classes, params)?)
}
