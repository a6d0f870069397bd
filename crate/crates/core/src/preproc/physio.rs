//! Removal of a weighted global component shared across channels.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{BinOp, Coord, LabeledTensor};
use crate::units::Unit;

/// Subtracts from every channel its least-squares projection onto the
/// weighted channel mean `g = Σ w·y / Σ w`, computed separately for every
/// index of the dims other than `channel` and `time`.
///
/// Only `k = 0` (the mean regressor alone) is supported.
pub fn global_component_subtract(
    ts: &LabeledTensor,
    weights: &LabeledTensor,
    k: usize,
) -> Result<(LabeledTensor, LabeledTensor)> {
    if k != 0 {
        return Err(Error::NotImplemented(alloc::format!("global component with k = {k}")));
    }
    let order: Vec<&str> = ts.dims().iter().map(|s| s.as_str()).collect();
    let rest: Vec<&str> = order.iter().copied().filter(|d| *d != "channel" && *d != "time").collect();
    let mut canon = vec!["channel"];
    canon.extend(&rest);
    canon.push("time");
    let y = ts.transpose(&canon)?;
    if weights.dims().iter().any(|d| !canon[..canon.len() - 1].contains(&d.as_str())) {
        return Err(Error::DimMismatch("weights may only span channel and non-time dims".into()));
    }
    let ones = y.reduce("time", crate::tensor::Reduction::Mean)?.map(|_| 1.0).with_unit(weights.unit().clone());
    let w = ones.binary(weights, BinOp::Mul)?.transpose(&canon[..canon.len() - 1])?;
    let nch = y.shape()[0];
    let nt = y.shape()[canon.len() - 1];
    let groups = y.len() / (nch * nt).max(1);
    let mut resid = y.data().to_vec();
    let mut gdata = vec![0.0; groups * nt];
    for gi in 0..groups {
        let sw: f64 = (0..nch).map(|c| w.data()[c * groups + gi]).sum();
        if !(sw > 0.0) {
            return Err(Error::ZeroWeights);
        }
        let g = &mut gdata[gi * nt..(gi + 1) * nt];
        for c in 0..nch {
            let wc = w.data()[c * groups + gi] / sw;
            let lane = &y.data()[(c * groups + gi) * nt..(c * groups + gi + 1) * nt];
            for (gt, &v) in g.iter_mut().zip(lane) {
                *gt += wc * v;
            }
        }
        let gg: f64 = g.iter().map(|v| v * v).sum();
        for c in 0..nch {
            let lane = &mut resid[(c * groups + gi) * nt..(c * groups + gi + 1) * nt];
            let beta = if gg > 0.0 { lane.iter().zip(g.iter()).map(|(a, b)| a * b).sum::<f64>() / gg } else { 0.0 };
            for (r, &gt) in lane.iter_mut().zip(g.iter()) {
                *r -= beta * gt;
            }
        }
    }
    let residual = y.with_data(resid)?.transpose(&order)?;
    let mut gdims: Vec<String> = rest.iter().map(|s| String::from(*s)).collect();
    gdims.push("time".into());
    let mut gshape: Vec<usize> = rest.iter().map(|d| y.size(d)).collect::<Result<_>>()?;
    gshape.push(nt);
    let gcoords: Vec<Coord> = y.coords().iter().filter(|c| gdims.contains(&c.dim)).cloned().collect();
    let unit: Unit = ts.unit().clone();
    let global = LabeledTensor::new(gdims, gshape, gdata, gcoords, unit)?;
    Ok((residual, global))
}
