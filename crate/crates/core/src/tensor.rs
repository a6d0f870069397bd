//! Dense labeled tensors with named dimensions, coordinates and units.
//!
//! Data is stored row-major as `f64`. Boolean tensors (masks) hold `0.0`
//! and `1.0` with a unitless unit.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::units::{scale_pow10, Quantity, Unit};

/// Values of one coordinate array.
#[derive(Debug, Clone)]
pub enum CoordValues {
    F64(Vec<f64>),
    Str(Vec<String>),
    Bool(Vec<bool>),
    I64(Vec<i64>),
}

impl CoordValues {
    pub fn len(&self) -> usize {
        match self {
            CoordValues::F64(v) => v.len(),
            CoordValues::Str(v) => v.len(),
            CoordValues::Bool(v) => v.len(),
            CoordValues::I64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> &'static str {
        match self {
            CoordValues::F64(_) => "f64",
            CoordValues::Str(_) => "str",
            CoordValues::Bool(_) => "bool",
            CoordValues::I64(_) => "i64",
        }
    }

    pub fn take(&self, idx: &[usize]) -> CoordValues {
        match self {
            CoordValues::F64(v) => CoordValues::F64(idx.iter().map(|&i| v[i]).collect()),
            CoordValues::Str(v) => CoordValues::Str(idx.iter().map(|&i| v[i].clone()).collect()),
            CoordValues::Bool(v) => CoordValues::Bool(idx.iter().map(|&i| v[i]).collect()),
            CoordValues::I64(v) => CoordValues::I64(idx.iter().map(|&i| v[i]).collect()),
        }
    }

    fn concat(&self, other: &CoordValues) -> Option<CoordValues> {
        Some(match (self, other) {
            (CoordValues::F64(a), CoordValues::F64(b)) => CoordValues::F64([&a[..], &b[..]].concat()),
            (CoordValues::Str(a), CoordValues::Str(b)) => CoordValues::Str([&a[..], &b[..]].concat()),
            (CoordValues::Bool(a), CoordValues::Bool(b)) => CoordValues::Bool([&a[..], &b[..]].concat()),
            (CoordValues::I64(a), CoordValues::I64(b)) => CoordValues::I64([&a[..], &b[..]].concat()),
            _ => return None,
        })
    }

    /// Exact equality: strings compare bytewise and floats by bit pattern.
    pub fn identical(&self, other: &CoordValues) -> bool {
        match (self, other) {
            (CoordValues::F64(a), CoordValues::F64(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (CoordValues::Str(a), CoordValues::Str(b)) => a == b,
            (CoordValues::Bool(a), CoordValues::Bool(b)) => a == b,
            (CoordValues::I64(a), CoordValues::I64(b)) => a == b,
            _ => false,
        }
    }
}

impl PartialEq for CoordValues {
    fn eq(&self, other: &Self) -> bool {
        self.identical(other)
    }
}

/// A named coordinate array attached to one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Coord {
    pub name: String,
    pub dim: String,
    pub values: CoordValues,
}

impl Coord {
    pub fn f64(name: &str, dim: &str, values: Vec<f64>) -> Self {
        Coord { name: name.into(), dim: dim.into(), values: CoordValues::F64(values) }
    }

    pub fn str<S: AsRef<str>>(name: &str, dim: &str, values: &[S]) -> Self {
        Coord {
            name: name.into(),
            dim: dim.into(),
            values: CoordValues::Str(values.iter().map(|s| s.as_ref().to_string()).collect()),
        }
    }

    pub fn strings(name: &str, dim: &str, values: Vec<String>) -> Self {
        Coord { name: name.into(), dim: dim.into(), values: CoordValues::Str(values) }
    }

    pub fn bool(name: &str, dim: &str, values: Vec<bool>) -> Self {
        Coord { name: name.into(), dim: dim.into(), values: CoordValues::Bool(values) }
    }

    pub fn i64(name: &str, dim: &str, values: Vec<i64>) -> Self {
        Coord { name: name.into(), dim: dim.into(), values: CoordValues::I64(values) }
    }
}

/// Coordinate-based selection predicates.
#[derive(Debug, Clone)]
pub enum Selector {
    /// Membership in a set of string labels.
    Labels(Vec<String>),
    /// Membership in a set of numeric values (exact comparison).
    Values(Vec<f64>),
    /// Boolean mask aligned with the coordinate's dimension.
    Mask(Vec<bool>),
    /// Boolean tensor over exactly the coordinate's dimension.
    MaskTensor(LabeledTensor),
    /// Closed numeric interval `[lo, hi]`.
    Range(f64, f64),
}

impl Selector {
    pub fn labels<S: AsRef<str>>(labels: &[S]) -> Self {
        Selector::Labels(labels.iter().map(|s| s.as_ref().to_string()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Mean,
    Sum,
    /// Sample standard deviation (N−1 denominator).
    Std,
    Max,
    Min,
    All,
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn apply(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Logic {
    And,
    Or,
}

pub fn truthy(x: f64) -> bool {
    x != 0.0 && !x.is_nan()
}

fn from_bool(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// A dense, row-major, labeled `f64` tensor with a physical unit.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTensor {
    dims: Vec<String>,
    shape: Vec<usize>,
    data: Vec<f64>,
    coords: Vec<Coord>,
    unit: Unit,
}

impl LabeledTensor {
    pub fn new(dims: Vec<String>, shape: Vec<usize>, data: Vec<f64>, coords: Vec<Coord>, unit: Unit) -> Result<Self> {
        if dims.len() != shape.len() {
            return Err(Error::DimMismatch(alloc::format!("{} dims but {} sizes", dims.len(), shape.len())));
        }
        for (i, d) in dims.iter().enumerate() {
            if dims[..i].contains(d) {
                return Err(Error::DuplicateDim(d.clone()));
            }
        }
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::DimMismatch(alloc::format!("data length {} but shape holds {}", data.len(), n)));
        }
        let mut t = LabeledTensor { dims, shape, data, coords: Vec::new(), unit };
        for c in coords {
            t.push_coord(c)?;
        }
        Ok(t)
    }

    /// Builds a tensor from string slices, parsing the unit expression.
    pub fn build(dims: &[&str], shape: &[usize], data: Vec<f64>, unit: &str) -> Result<Self> {
        LabeledTensor::new(
            dims.iter().map(|s| s.to_string()).collect(),
            shape.to_vec(),
            data,
            Vec::new(),
            Unit::parse(unit)?,
        )
    }

    pub fn zeros(dims: &[&str], shape: &[usize], unit: Unit) -> Result<Self> {
        let n = shape.iter().product();
        LabeledTensor::new(dims.iter().map(|s| s.to_string()).collect(), shape.to_vec(), vec![0.0; n], Vec::new(), unit)
    }

    fn push_coord(&mut self, c: Coord) -> Result<()> {
        let axis = self.axis(&c.dim)?;
        if c.values.len() != self.shape[axis] {
            return Err(Error::DimMismatch(alloc::format!(
                "coord `{}` has {} values but dim `{}` has size {}",
                c.name,
                c.values.len(),
                c.dim,
                self.shape[axis]
            )));
        }
        match self.coords.iter_mut().find(|x| x.name == c.name) {
            Some(slot) => *slot = c,
            None => self.coords.push(c),
        }
        Ok(())
    }

    /// Attaches (or replaces) a coordinate.
    pub fn with_coord(mut self, c: Coord) -> Result<Self> {
        self.push_coord(c)?;
        Ok(self)
    }

    pub fn with_coords(mut self, cs: impl IntoIterator<Item = Coord>) -> Result<Self> {
        for c in cs {
            self.push_coord(c)?;
        }
        Ok(self)
    }

    pub fn without_coord(mut self, name: &str) -> Self {
        self.coords.retain(|c| c.name != name);
        self
    }

    pub fn with_unit(mut self, unit: Unit) -> Self {
        self.unit = unit;
        self
    }

    /// Same layout and coordinates with new data.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        if data.len() != self.data.len() {
            return Err(Error::DimMismatch(alloc::format!("data length {} but tensor holds {}", data.len(), self.data.len())));
        }
        Ok(LabeledTensor { data, ..self.clone_meta() })
    }

    fn clone_meta(&self) -> Self {
        LabeledTensor {
            dims: self.dims.clone(),
            shape: self.shape.clone(),
            data: Vec::new(),
            coords: self.coords.clone(),
            unit: self.unit.clone(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        LabeledTensor { data: self.data.iter().map(|&x| f(x)).collect(), ..self.clone_meta() }
    }

    pub fn into_parts(self) -> (Vec<String>, Vec<usize>, Vec<f64>, Vec<Coord>, Unit) {
        (self.dims, self.shape, self.data, self.coords, self.unit)
    }

    pub fn dims(&self) -> &[String] {
        &self.dims
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn unit(&self) -> &Unit {
        &self.unit
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn has_dim(&self, dim: &str) -> bool {
        self.dims.iter().any(|d| d == dim)
    }

    pub fn axis(&self, dim: &str) -> Result<usize> {
        self.dims.iter().position(|d| d == dim).ok_or_else(|| Error::UnknownDim(dim.to_string()))
    }

    pub fn size(&self, dim: &str) -> Result<usize> {
        Ok(self.shape[self.axis(dim)?])
    }

    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    pub fn coord(&self, name: &str) -> Option<&Coord> {
        self.coords.iter().find(|c| c.name == name)
    }

    pub fn coords_on<'a>(&'a self, dim: &'a str) -> impl Iterator<Item = &'a Coord> + 'a {
        self.coords.iter().filter(move |c| c.dim == dim)
    }

    pub fn coord_f64(&self, name: &str) -> Result<&[f64]> {
        match self.coord(name).map(|c| &c.values) {
            Some(CoordValues::F64(v)) => Ok(v),
            _ => Err(Error::UnknownCoord(name.to_string())),
        }
    }

    pub fn coord_str(&self, name: &str) -> Result<&[String]> {
        match self.coord(name).map(|c| &c.values) {
            Some(CoordValues::Str(v)) => Ok(v),
            _ => Err(Error::UnknownCoord(name.to_string())),
        }
    }

    pub fn coord_bool(&self, name: &str) -> Result<&[bool]> {
        match self.coord(name).map(|c| &c.values) {
            Some(CoordValues::Bool(v)) => Ok(v),
            _ => Err(Error::UnknownCoord(name.to_string())),
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum()
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat_index(idx)]
    }

    /// Position of a string label in a coordinate.
    pub fn label_index(&self, coord: &str, label: &str) -> Result<usize> {
        self.coord_str(coord)?
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownCoord(alloc::format!("{coord}={label}")))
    }

    /// Sub-tensor along `dim` at the given indices (in the given order).
    pub fn isel(&self, dim: &str, indices: &[usize]) -> Result<Self> {
        let axis = self.axis(dim)?;
        let n = self.shape[axis];
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::DimMismatch(alloc::format!("index {bad} out of range for `{dim}` of size {n}")));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * indices.len() * inner);
        for o in 0..outer {
            for &i in indices {
                let start = (o * n + i) * inner;
                data.extend_from_slice(&self.data[start..start + inner]);
            }
        }
        let mut shape = self.shape.clone();
        shape[axis] = indices.len();
        let coords = self
            .coords
            .iter()
            .map(|c| if c.dim == dim { Coord { values: c.values.take(indices), ..c.clone() } } else { c.clone() })
            .collect();
        Ok(LabeledTensor { dims: self.dims.clone(), shape, data, coords, unit: self.unit.clone() })
    }

    /// Selects along the dimension carrying `coord_name`, preserving order.
    pub fn select(&self, coord_name: &str, sel: &Selector) -> Result<Self> {
        let c = self.coord(coord_name).ok_or_else(|| Error::UnknownCoord(coord_name.to_string()))?;
        let n = c.values.len();
        let keep: Vec<bool> = match (sel, &c.values) {
            (Selector::Labels(ls), CoordValues::Str(v)) => v.iter().map(|x| ls.contains(x)).collect(),
            (Selector::Values(vs), CoordValues::F64(v)) => {
                v.iter().map(|x| vs.iter().any(|y| y.to_bits() == x.to_bits() || y == x)).collect()
            }
            (Selector::Values(vs), CoordValues::I64(v)) => v.iter().map(|&x| vs.contains(&(x as f64))).collect(),
            (Selector::Range(lo, hi), CoordValues::F64(v)) => v.iter().map(|x| *x >= *lo && *x <= *hi).collect(),
            (Selector::Range(lo, hi), CoordValues::I64(v)) => {
                v.iter().map(|&x| (x as f64) >= *lo && (x as f64) <= *hi).collect()
            }
            (Selector::Mask(m), _) => {
                if m.len() != n {
                    return Err(Error::UnalignedSelector(coord_name.to_string()));
                }
                m.clone()
            }
            (Selector::MaskTensor(m), _) => {
                if m.dims.len() != 1 || m.dims[0] != c.dim || m.shape[0] != n {
                    return Err(Error::UnalignedSelector(coord_name.to_string()));
                }
                if let Some(mc) = m.coord(coord_name) {
                    if !mc.values.identical(&c.values) {
                        return Err(Error::UnalignedSelector(coord_name.to_string()));
                    }
                }
                m.data.iter().map(|&x| truthy(x)).collect()
            }
            _ => return Err(Error::UnalignedSelector(coord_name.to_string())),
        };
        let idx: Vec<usize> = keep.iter().enumerate().filter(|(_, k)| **k).map(|(i, _)| i).collect();
        let dim = c.dim.clone();
        self.isel(&dim, &idx)
    }

    /// Reduces over `dim` with NaN propagation.
    pub fn reduce(&self, dim: &str, op: Reduction) -> Result<Self> {
        self.reduce_impl(dim, op, false)
    }

    /// Reduces over `dim` ignoring NaN entries.
    pub fn reduce_skipna(&self, dim: &str, op: Reduction) -> Result<Self> {
        self.reduce_impl(dim, op, true)
    }

    fn reduce_impl(&self, dim: &str, op: Reduction, skipna: bool) -> Result<Self> {
        let axis = self.axis(dim)?;
        let n = self.shape[axis];
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * inner);
        let mut lane = Vec::with_capacity(n);
        for o in 0..outer {
            for i in 0..inner {
                lane.clear();
                for k in 0..n {
                    let x = self.data[(o * n + k) * inner + i];
                    if !(skipna && x.is_nan()) {
                        lane.push(x);
                    }
                }
                out.push(reduce_lane(&lane, op));
            }
        }
        let mut dims = self.dims.clone();
        dims.remove(axis);
        let mut shape = self.shape.clone();
        shape.remove(axis);
        let coords = self.coords.iter().filter(|c| c.dim != dim).cloned().collect();
        let unit = match op {
            Reduction::All | Reduction::Any => Unit::unitless(),
            _ => self.unit.clone(),
        };
        Ok(LabeledTensor { dims, shape, data: out, coords, unit })
    }

    /// Element-wise arithmetic with broadcasting by dimension name.
    ///
    /// The result's dims are `self`'s followed by dims only present in
    /// `other`. For add/sub, `other` is converted into `self`'s unit.
    pub fn binary(&self, other: &LabeledTensor, op: BinOp) -> Result<Self> {
        let (unit, k) = match op {
            BinOp::Add | BinOp::Sub => (self.unit.clone(), other.unit.conversion_exp10(&self.unit)?),
            BinOp::Mul => (self.unit.mul(&other.unit), 0),
            BinOp::Div => (self.unit.div(&other.unit), 0),
        };
        self.broadcast(other, unit, move |a, b| {
            let b = scale_pow10(b, k);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
            }
        })
    }

    /// Element-wise comparison after unit conversion; yields a mask.
    pub fn compare(&self, other: &LabeledTensor, op: CmpOp) -> Result<Self> {
        let k = other.unit.conversion_exp10(&self.unit)?;
        self.broadcast(other, Unit::unitless(), move |a, b| from_bool(op.apply(a, scale_pow10(b, k))))
    }

    /// Compares every element with a quantity converted to this tensor's unit.
    pub fn compare_quantity(&self, q: &Quantity, op: CmpOp) -> Result<Self> {
        let v = q.to(&self.unit)?;
        Ok(LabeledTensor {
            data: self.data.iter().map(|&a| from_bool(op.apply(a, v))).collect(),
            unit: Unit::unitless(),
            ..self.clone_meta()
        })
    }

    pub fn logical(&self, other: &LabeledTensor, op: Logic) -> Result<Self> {
        self.broadcast(other, Unit::unitless(), move |a, b| match op {
            Logic::And => from_bool(truthy(a) && truthy(b)),
            Logic::Or => from_bool(truthy(a) || truthy(b)),
        })
    }

    pub fn logical_not(&self) -> Self {
        LabeledTensor {
            data: self.data.iter().map(|&a| from_bool(!truthy(a))).collect(),
            unit: Unit::unitless(),
            ..self.clone_meta()
        }
    }

    /// Scalar arithmetic in this tensor's unit.
    pub fn scalar(&self, op: BinOp, v: f64) -> Self {
        self.map(|a| match op {
            BinOp::Add => a + v,
            BinOp::Sub => a - v,
            BinOp::Mul => a * v,
            BinOp::Div => a / v,
        })
    }

    /// Re-expresses the data in a compatible unit.
    pub fn convert_to(&self, unit: &Unit) -> Result<Self> {
        let k = self.unit.conversion_exp10(unit)?;
        Ok(LabeledTensor {
            data: self.data.iter().map(|&a| scale_pow10(a, k)).collect(),
            unit: unit.clone(),
            ..self.clone_meta()
        })
    }

    fn broadcast(&self, other: &LabeledTensor, unit: Unit, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut dims = self.dims.clone();
        let mut shape = self.shape.clone();
        for (d, &s) in other.dims.iter().zip(&other.shape) {
            match self.dims.iter().position(|x| x == d) {
                Some(ax) if self.shape[ax] != s => {
                    return Err(Error::DimMismatch(alloc::format!("dim `{d}` has sizes {} and {s}", self.shape[ax])))
                }
                Some(_) => {}
                None => {
                    dims.push(d.clone());
                    shape.push(s);
                }
            }
        }
        let mut coords = self.coords.clone();
        for c in &other.coords {
            match coords.iter().find(|x| x.name == c.name) {
                Some(x) if x.dim != c.dim || !x.values.identical(&c.values) => {
                    return Err(Error::CoordMismatch(c.name.clone()))
                }
                Some(_) => {}
                None => coords.push(c.clone()),
            }
        }
        let sa = broadcast_strides(&self.dims, &self.shape, &dims);
        let sb = broadcast_strides(&other.dims, &other.shape, &dims);
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; dims.len()];
        let (mut oa, mut ob) = (0usize, 0usize);
        for _ in 0..n {
            data.push(f(self.data[oa], other.data[ob]));
            // Odometer increment, tracking both operand offsets.
            for ax in (0..dims.len()).rev() {
                idx[ax] += 1;
                oa += sa[ax];
                ob += sb[ax];
                if idx[ax] < shape[ax] {
                    break;
                }
                oa -= sa[ax] * shape[ax];
                ob -= sb[ax] * shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(LabeledTensor { dims, shape, data, coords, unit })
    }

    /// Permutes dimensions into `order`, which must name every dim once.
    pub fn transpose(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.dims.len() {
            return Err(Error::DimMismatch(alloc::format!("transpose order {:?} vs dims {:?}", order, self.dims)));
        }
        let perm: Vec<usize> = order.iter().map(|d| self.axis(d)).collect::<Result<_>>()?;
        let src_strides = self.strides();
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let strides: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
        let n = self.data.len();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; shape.len()];
        let mut off = 0usize;
        for _ in 0..n {
            data.push(self.data[off]);
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                off += strides[ax];
                if idx[ax] < shape[ax] {
                    break;
                }
                off -= strides[ax] * shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(LabeledTensor {
            dims: order.iter().map(|s| s.to_string()).collect(),
            shape,
            data,
            coords: self.coords.clone(),
            unit: self.unit.clone(),
        })
    }

    /// Moves `dim` to the last position, keeping the others in order.
    pub fn move_to_last(&self, dim: &str) -> Result<Self> {
        self.axis(dim)?;
        let mut order: Vec<&str> = self.dims.iter().filter(|d| *d != dim).map(|s| s.as_str()).collect();
        order.push(dim);
        self.transpose(&order)
    }

    /// Applies `f` to every 1-D lane along `dim`.
    ///
    /// `f` receives the input lane and writes an output lane of length
    /// `new_len`. When the length changes, coords on `dim` are dropped and
    /// replaced by `new_coords`.
    pub fn map_lanes<F>(&self, dim: &str, new_len: usize, new_coords: Vec<Coord>, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64], &mut [f64]) -> Result<()>,
    {
        let axis = self.axis(dim)?;
        let n = self.shape[axis];
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut data = vec![0.0; outer * new_len * inner];
        let mut lane = vec![0.0; n];
        let mut out = vec![0.0; new_len];
        for o in 0..outer {
            for i in 0..inner {
                for k in 0..n {
                    lane[k] = self.data[(o * n + k) * inner + i];
                }
                f(&lane, &mut out)?;
                for k in 0..new_len {
                    data[(o * new_len + k) * inner + i] = out[k];
                }
            }
        }
        let mut shape = self.shape.clone();
        shape[axis] = new_len;
        let mut coords: Vec<Coord> = if new_len == n {
            self.coords.clone()
        } else {
            self.coords.iter().filter(|c| c.dim != dim).cloned().collect()
        };
        for c in new_coords {
            coords.retain(|x| x.name != c.name);
            coords.push(c);
        }
        LabeledTensor::new(self.dims.clone(), shape, data, coords, self.unit.clone())
    }

    /// Iterates over lanes along `dim` with read-only access.
    pub fn lanes(&self, dim: &str) -> Result<Vec<Vec<f64>>> {
        let axis = self.axis(dim)?;
        let n = self.shape[axis];
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                out.push((0..n).map(|k| self.data[(o * n + k) * inner + i]).collect());
            }
        }
        Ok(out)
    }

    pub fn rename_dim(&self, from: &str, to: &str) -> Result<Self> {
        let axis = self.axis(from)?;
        if from != to && self.has_dim(to) {
            return Err(Error::DuplicateDim(to.to_string()));
        }
        let mut t = self.clone();
        t.dims[axis] = to.to_string();
        for c in &mut t.coords {
            if c.dim == from {
                c.dim = to.to_string();
            }
        }
        Ok(t)
    }

    /// Concatenates tensors along an existing dimension.
    pub fn concat(parts: &[LabeledTensor], dim: &str) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::BadParam("concat of nothing".into()))?;
        let mut acc = first.move_to_first(dim)?;
        for p in &parts[1..] {
            let p = p.move_to_first(dim)?.transpose(&acc.dims.iter().map(|s| s.as_str()).collect::<Vec<_>>())?;
            if p.shape[1..] != acc.shape[1..] {
                return Err(Error::DimMismatch(alloc::format!("concat along `{dim}`: shapes differ")));
            }
            let u = p.unit.conversion_exp10(&acc.unit)?;
            acc.data.extend(p.data.iter().map(|&x| scale_pow10(x, u)));
            acc.shape[0] += p.shape[0];
            let mut coords = Vec::new();
            for c in &acc.coords {
                if c.dim == dim {
                    let other = p.coord(&c.name).ok_or_else(|| Error::CoordMismatch(c.name.clone()))?;
                    let values = c.values.concat(&other.values).ok_or_else(|| Error::CoordMismatch(c.name.clone()))?;
                    coords.push(Coord { values, ..c.clone() });
                } else {
                    if let Some(o) = p.coord(&c.name) {
                        if !o.values.identical(&c.values) {
                            return Err(Error::CoordMismatch(c.name.clone()));
                        }
                    }
                    coords.push(c.clone());
                }
            }
            acc.coords = coords;
        }
        let order: Vec<&str> = first.dims.iter().map(|s| s.as_str()).collect();
        acc.transpose(&order)
    }

    fn move_to_first(&self, dim: &str) -> Result<Self> {
        self.axis(dim)?;
        let mut order = vec![dim];
        order.extend(self.dims.iter().filter(|d| *d != dim).map(|s| s.as_str()));
        self.transpose(&order)
    }

    /// Stacks equally shaped tensors along a new leading dimension.
    pub fn stack(parts: &[LabeledTensor], dim: &str, coords: Vec<Coord>) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::BadParam("stack of nothing".into()))?;
        let mut data = Vec::with_capacity(first.len() * parts.len());
        for p in parts {
            let p = p.transpose(&first.dims.iter().map(|s| s.as_str()).collect::<Vec<_>>())?;
            if p.shape != first.shape {
                return Err(Error::DimMismatch(alloc::format!("stack along `{dim}`: shapes differ")));
            }
            let u = p.unit.conversion_exp10(&first.unit)?;
            data.extend(p.data.iter().map(|&x| scale_pow10(x, u)));
        }
        let mut dims = vec![dim.to_string()];
        dims.extend(first.dims.iter().cloned());
        let mut shape = vec![parts.len()];
        shape.extend(first.shape.iter().copied());
        let mut all = first.coords.clone();
        all.extend(coords);
        LabeledTensor::new(dims, shape, data, all, first.unit.clone())
    }

    /// Inserts a new dimension of size 1 at `pos`.
    pub fn expand_dims(&self, dim: &str, pos: usize) -> Result<Self> {
        if self.has_dim(dim) {
            return Err(Error::DuplicateDim(dim.to_string()));
        }
        let mut t = self.clone();
        t.dims.insert(pos, dim.to_string());
        t.shape.insert(pos, 1);
        Ok(t)
    }
}

fn reduce_lane(v: &[f64], op: Reduction) -> f64 {
    let n = v.len() as f64;
    match op {
        Reduction::Sum => v.iter().sum(),
        Reduction::Mean => v.iter().sum::<f64>() / n,
        Reduction::Std => {
            let m = v.iter().sum::<f64>() / n;
            libm::sqrt(v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
        }
        Reduction::Max => {
            if v.is_empty() {
                f64::NAN
            } else if v.iter().any(|x| x.is_nan()) {
                f64::NAN
            } else {
                v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        }
        Reduction::Min => {
            if v.is_empty() {
                f64::NAN
            } else if v.iter().any(|x| x.is_nan()) {
                f64::NAN
            } else {
                v.iter().copied().fold(f64::INFINITY, f64::min)
            }
        }
        Reduction::All => from_bool(v.iter().all(|&x| truthy(x))),
        Reduction::Any => from_bool(v.iter().any(|&x| truthy(x))),
    }
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

fn broadcast_strides(dims: &[String], shape: &[usize], target: &[String]) -> Vec<usize> {
    let own = strides_of(shape);
    target
        .iter()
        .map(|d| dims.iter().position(|x| x == d).map(|ax| own[ax]).unwrap_or(0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ch_time() -> LabeledTensor {
        LabeledTensor::build(&["channel", "time"], &[2, 4], (0..8).map(|x| x as f64).collect(), "V")
            .unwrap()
            .with_coord(Coord::str("channel", "channel", &["S1D1", "S1D2"]))
            .unwrap()
            .with_coord(Coord::f64("time", "time", vec![0.0, 0.5, 1.0, 1.5]))
            .unwrap()
    }

    #[test]
    fn builds_and_validates() {
        let t = LabeledTensor::build(&["time"], &[3], vec![0.0, 1.0, 2.0], "V")
            .unwrap()
            .with_coord(Coord::f64("time", "time", vec![0.0, 0.5, 1.0]))
            .unwrap();
        assert_eq!(t.shape(), &[3]);
        let bad = LabeledTensor::build(&["time"], &[3], vec![0.0; 3], "V")
            .unwrap()
            .with_coord(Coord::f64("time", "time", vec![0.0, 0.5]));
        assert!(matches!(bad, Err(Error::DimMismatch(_))));
        assert!(matches!(LabeledTensor::build(&["a", "a"], &[1, 1], vec![0.0], "V"), Err(Error::DuplicateDim(_))));
        assert!(matches!(LabeledTensor::build(&["a"], &[1], vec![0.0], "furlongs^½"), Err(Error::BadUnit(_))));
        assert!(matches!(LabeledTensor::build(&["a"], &[2], vec![0.0], "V"), Err(Error::DimMismatch(_))));
    }

    #[test]
    fn select_labels() {
        let t = ch_time();
        let s = t.select("channel", &Selector::labels(&["S1D1"])).unwrap();
        assert_eq!(s.shape(), &[1, 4]);
        assert_eq!(s.data(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(s.coord_str("channel").unwrap(), &["S1D1".to_string()]);
        assert_eq!(s.coord_f64("time").unwrap().len(), 4);
    }

    #[test]
    fn select_all_true_is_identity() {
        let t = ch_time();
        assert_eq!(t.select("time", &Selector::Mask(vec![true; 4])).unwrap(), t);
    }

    #[test]
    fn select_errors() {
        let t = ch_time();
        assert!(matches!(t.select("nope", &Selector::Mask(vec![])), Err(Error::UnknownCoord(_))));
        assert!(matches!(t.select("time", &Selector::Mask(vec![true])), Err(Error::UnalignedSelector(_))));
        let wrong = LabeledTensor::build(&["channel"], &[2], vec![1.0, 0.0], "").unwrap();
        assert!(matches!(t.select("time", &Selector::MaskTensor(wrong.clone())), Err(Error::UnalignedSelector(_))));
        let s = t.select("channel", &Selector::MaskTensor(wrong)).unwrap();
        assert_eq!(s.size("channel").unwrap(), 1);
    }

    #[test]
    fn select_range_first_index() {
        let n = 8794;
        let time: Vec<f64> = (0..n).map(|i| i as f64 * 0.2294).collect();
        let t = LabeledTensor::build(&["time"], &[n], vec![0.0; n], "V")
            .unwrap()
            .with_coord(Coord::f64("time", "time", time.clone()))
            .unwrap()
            .with_coord(Coord::i64("samples", "time", (0..n as i64).collect()))
            .unwrap();
        let s = t.select("time", &Selector::Range(5.0, 315.0)).unwrap();
        let first = match &s.coord("samples").unwrap().values {
            CoordValues::I64(v) => v[0],
            _ => unreachable!(),
        };
        // Oracle: first timestamp not below 5 s.
        let expect = time.iter().position(|&x| x >= 5.0).unwrap() as i64;
        assert_eq!(first, expect);
        assert_eq!(first, 22);
    }

    #[test]
    fn reductions() {
        let t = LabeledTensor::build(&["time"], &[3], vec![1.0, 2.0, 3.0], "V").unwrap();
        assert_eq!(t.reduce("time", Reduction::Mean).unwrap().data(), &[2.0]);
        let m = LabeledTensor::build(&["time"], &[3], vec![1.0, 1.0, 0.0], "").unwrap();
        assert_eq!(m.reduce("time", Reduction::All).unwrap().data(), &[0.0]);
        let c = LabeledTensor::build(&["time"], &[3], vec![1.0; 3], "V").unwrap();
        assert_eq!(c.reduce("time", Reduction::Std).unwrap().data(), &[0.0]);
        assert!(matches!(t.reduce("x", Reduction::Sum), Err(Error::UnknownDim(_))));
    }

    #[test]
    fn nan_strict_and_skipped() {
        let t = LabeledTensor::build(&["time"], &[3], vec![1.0, f64::NAN, 3.0], "V").unwrap();
        assert!(t.reduce("time", Reduction::Mean).unwrap().data()[0].is_nan());
        assert!(t.reduce("time", Reduction::Max).unwrap().data()[0].is_nan());
        assert_eq!(t.reduce_skipna("time", Reduction::Mean).unwrap().data(), &[2.0]);
        assert_eq!(t.reduce_skipna("time", Reduction::Max).unwrap().data(), &[3.0]);
    }

    #[test]
    fn compare_across_units() {
        let d = LabeledTensor::build(&["channel"], &[3], vec![1.0, 1.5, 3.0], "cm").unwrap();
        let m = d.compare_quantity(&Quantity::new(15.0, "mm").unwrap(), CmpOp::Le).unwrap();
        assert_eq!(m.data(), &[1.0, 1.0, 0.0]);
        assert!(m.unit().is_unitless());
    }

    #[test]
    fn add_zero_and_unit_mismatch() {
        let t = ch_time();
        let z = LabeledTensor::zeros(&["time"], &[4], Unit::parse("mV").unwrap()).unwrap();
        assert_eq!(t.binary(&z, BinOp::Add).unwrap(), t);
        let c = LabeledTensor::zeros(&["time"], &[4], Unit::parse("uM").unwrap()).unwrap();
        assert!(matches!(t.binary(&c, BinOp::Add), Err(Error::UnitMismatch(..))));
    }

    #[test]
    fn coord_mismatch() {
        let t = ch_time();
        let o = LabeledTensor::build(&["time"], &[4], vec![0.0; 4], "V")
            .unwrap()
            .with_coord(Coord::f64("time", "time", vec![0.0, 0.5, 1.0, 2.0]))
            .unwrap();
        assert!(matches!(t.binary(&o, BinOp::Add), Err(Error::CoordMismatch(_))));
    }

    #[test]
    fn mask_and_broadcast_transposed() {
        let a = LabeledTensor::build(&["t", "c"], &[2, 3], vec![1.0, 0.0, 1.0, 1.0, 1.0, 0.0], "").unwrap();
        let b = LabeledTensor::build(&["c", "t"], &[3, 2], vec![1.0, 1.0, 1.0, 0.0, 1.0, 1.0], "").unwrap();
        let r = a.logical(&b, Logic::And).unwrap();
        assert_eq!(r.dims(), &["t".to_string(), "c".to_string()]);
        assert_eq!(r.data(), &[1.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn transpose_round_trip() {
        let t = ch_time();
        let tt = t.transpose(&["time", "channel"]).unwrap();
        assert_eq!(tt.get(&[1, 1]), 5.0);
        assert_eq!(tt.transpose(&["channel", "time"]).unwrap(), t);
    }

    #[test]
    fn concat_along_channel() {
        let t = ch_time();
        let a = t.isel("channel", &[0]).unwrap();
        let b = t.isel("channel", &[1]).unwrap();
        assert_eq!(LabeledTensor::concat(&[a, b], "channel").unwrap(), t);
    }

    fn arb_tensor(dims: Vec<&'static str>) -> impl Strategy<Value = LabeledTensor> {
        let shape_strategy = proptest::collection::vec(1usize..4, dims.len());
        shape_strategy.prop_flat_map(move |shape| {
            let n: usize = shape.iter().product();
            let dims = dims.clone();
            proptest::collection::vec(-5i32..5, n).prop_map(move |v| {
                LabeledTensor::build(&dims, &shape, v.into_iter().map(|x| x as f64).collect(), "").unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn select_reduce_commute(t in arb_tensor(vec!["a", "b", "c"]), seed in 0u64..1000) {
            let na = t.size("a").unwrap();
            let mask: Vec<bool> = (0..na).map(|i| (seed >> (i % 10)) & 1 == 1).collect();
            let t = t.with_coord(Coord::i64("a", "a", (0..na as i64).collect())).unwrap();
            let x = t.select("a", &Selector::Mask(mask.clone())).unwrap().reduce("b", Reduction::Sum).unwrap();
            let y = t.reduce("b", Reduction::Sum).unwrap().select("a", &Selector::Mask(mask)).unwrap();
            prop_assert_eq!(x, y);
        }

        #[test]
        fn all_matches_brute_force(t in arb_tensor(vec!["a", "b"])) {
            let m = t.map(|x| if x > -3.0 { 1.0 } else { 0.0 });
            let r = m.reduce("b", Reduction::All).unwrap();
            let (na, nb) = (m.shape()[0], m.shape()[1]);
            for i in 0..na {
                let mut all = true;
                for j in 0..nb {
                    all &= m.get(&[i, j]) != 0.0;
                }
                prop_assert_eq!(r.data()[i] != 0.0, all);
            }
        }

        #[test]
        fn broadcast_matches_nested_loops(a in arb_tensor(vec!["x", "y", "z"]), b0 in arb_tensor(vec!["z", "x"])) {
            // Force b's shared dims to agree with a.
            let (nx, ny, nz) = (a.shape()[0], a.shape()[1], a.shape()[2]);
            let bdata: Vec<f64> = (0..nz * nx).map(|i| b0.data()[i % b0.len()] + i as f64).collect();
            let b = LabeledTensor::build(&["z", "x"], &[nz, nx], bdata, "").unwrap();
            let r = a.binary(&b, BinOp::Mul).unwrap();
            for i in 0..nx { for j in 0..ny { for k in 0..nz {
                prop_assert_eq!(r.get(&[i, j, k]), a.get(&[i, j, k]) * b.get(&[k, i]));
            }}}
            let _ = ny;
        }
    }
}
