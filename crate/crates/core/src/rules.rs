//! Decision rules as membership predicates over `R^d`, and the parametric
//! transformation families that move them.
//!
//! A rule is a base set (an SVM acceptance set `{f >= 0}`, a halfspace, a
//! quadratic cone, or a constant set) plus a stack of transforms. Transforms
//! act through point preimages: a point `x` belongs to `h(G, theta)` iff
//! `T_theta^{-1} x` belongs to `G`. Score offsets instead shift the base
//! decision value.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::dataset::Features;
use crate::error::{Error, Result};
use crate::svm::{sign_label, SvmModel};

/// The untransformed set a rule starts from.
#[derive(Debug, Clone)]
pub enum BaseRule {
    /// `{x : f(x) >= 0}` for a trained SVM.
    Svm(Arc<SvmModel>),
    /// `{x : normal . x + intercept >= 0}`.
    Halfspace { normal: Vec<f64>, intercept: f64 },
    /// `{x : x' Q x >= 0}` with `Q` row-major `dim x dim`.
    Quadratic { matrix: Vec<f64>, dim: usize },
    /// The whole space (`true`) or the empty set (`false`). Has no decision value.
    Constant(bool),
}

impl BaseRule {
    pub fn dim(&self) -> Option<usize> {
        match self {
            BaseRule::Svm(m) => Some(m.dim()),
            BaseRule::Halfspace { normal, .. } => Some(normal.len()),
            BaseRule::Quadratic { dim, .. } => Some(*dim),
            BaseRule::Constant(_) => None,
        }
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        match self {
            BaseRule::Svm(m) => Some(m.decision_value_unchecked(x)),
            BaseRule::Halfspace { normal, intercept } => {
                Some(normal.iter().zip(x).map(|(b, v)| b * v).sum::<f64>() + intercept)
            }
            BaseRule::Quadratic { matrix, dim } => {
                let mut total = 0.0;
                for i in 0..*dim {
                    let row = &matrix[i * dim..(i + 1) * dim];
                    let qi: f64 = row.iter().zip(x).map(|(q, v)| q * v).sum();
                    total += x[i] * qi;
                }
                Some(total)
            }
            BaseRule::Constant(_) => None,
        }
    }

    fn describe(&self) -> String {
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        match self {
            BaseRule::Svm(m) => format!(
                "svm(dim={},n_support={},sigma={},lambda={})",
                m.dim(),
                m.n_support(),
                m.sigma(),
                m.lambda()
            ),
            BaseRule::Halfspace { normal, intercept } => {
                format!("halfspace(normal=[{}],intercept={intercept})", list(normal))
            }
            BaseRule::Quadratic { matrix, dim } => format!("quadratic(dim={dim},matrix=[{}])", list(matrix)),
            BaseRule::Constant(v) => format!("constant({v})"),
        }
    }
}

/// Per-coordinate closed intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Argument("parameter box needs matching nonempty bounds".into()));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::Argument(format!("invalid parameter interval [{lo}, {hi}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta.iter().zip(&self.lower).zip(&self.upper).all(|((t, lo), hi)| lo <= t && t <= hi)
    }

    pub fn clamp(&self, theta: &mut [f64]) {
        for ((t, lo), hi) in theta.iter_mut().zip(&self.lower).zip(&self.upper) {
            *t = t.clamp(*lo, *hi);
        }
    }

    /// Largest Euclidean norm of a point in the box.
    pub fn radius(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo.abs().max(hi.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn concat(boxes: &[&ParamBox]) -> Result<Self> {
        Self::new(
            boxes.iter().flat_map(|b| b.lower.iter().copied()).collect(),
            boxes.iter().flat_map(|b| b.upper.iter().copied()).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransformKind {
    /// Adds `theta` to the base decision value.
    FunctionOffset,
    /// Shifts the set by `theta * direction`.
    SpatialTranslation { direction: Vec<f64> },
    /// Rotates within coordinate plane `(i, j)`; membership is evaluated at
    /// `P(theta) x` with `P` the Givens matrix `[[cos, -sin], [sin, cos]]`.
    CoordinateRotation { plane: (usize, usize) },
    /// Children applied in list order; `theta` is their concatenation.
    Composite(Vec<TransformFamily>),
}

/// A named parametric family `h(., theta)` with its parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformFamily {
    kind: TransformKind,
    bounds: ParamBox,
    /// Optional Lipschitz constants `(M1, M2)` under the symmetric-difference measure.
    pub lipschitz_hint: Option<(f64, f64)>,
}

impl TransformFamily {
    pub fn function_offset(lo: f64, hi: f64) -> Result<Self> {
        Ok(Self { kind: TransformKind::FunctionOffset, bounds: ParamBox::interval(lo, hi)?, lipschitz_hint: None })
    }

    /// Translation by `theta * direction`. Pass a unit vector for `theta` in
    /// distance units.
    pub fn spatial_translation(direction: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if direction.is_empty() || direction.iter().any(|v| !v.is_finite()) || direction.iter().all(|v| *v == 0.0) {
            return Err(Error::Argument("translation direction must be a nonzero finite vector".into()));
        }
        Ok(Self {
            kind: TransformKind::SpatialTranslation { direction },
            bounds: ParamBox::interval(lo, hi)?,
            lipschitz_hint: None,
        })
    }

    /// Translation along `-normal / ||normal||^2`, so that shifting the
    /// halfspace `{normal . x > 0}` by `theta` gives `{normal . x + theta > 0}`.
    pub fn normal_shift(normal: &[f64], lo: f64, hi: f64) -> Result<Self> {
        let norm2: f64 = normal.iter().map(|v| v * v).sum();
        if norm2 == 0.0 {
            return Err(Error::Argument("normal must be nonzero".into()));
        }
        Self::spatial_translation(normal.iter().map(|v| -v / norm2).collect(), lo, hi)
    }

    pub fn coordinate_rotation(i: usize, j: usize, lo: f64, hi: f64) -> Result<Self> {
        if i == j {
            return Err(Error::Argument("rotation plane needs two distinct coordinates".into()));
        }
        Ok(Self {
            kind: TransformKind::CoordinateRotation { plane: (i, j) },
            bounds: ParamBox::interval(lo, hi)?,
            lipschitz_hint: None,
        })
    }

    pub fn composite(children: Vec<TransformFamily>) -> Result<Self> {
        if children.is_empty() {
            return Err(Error::Argument("composite family needs at least one child".into()));
        }
        let bounds = ParamBox::concat(&children.iter().map(|c| &c.bounds).collect::<Vec<_>>())?;
        Ok(Self { kind: TransformKind::Composite(children), bounds, lipschitz_hint: None })
    }

    pub fn with_lipschitz(mut self, m1: f64, m2: f64) -> Self {
        self.lipschitz_hint = Some((m1, m2));
        self
    }

    pub fn with_bounds(mut self, bounds: ParamBox) -> Result<Self> {
        if bounds.dim() != self.parameter_dim() {
            return Err(Error::Argument("bounds dimension does not match the family".into()));
        }
        self.bounds = bounds;
        Ok(self)
    }

    pub fn kind(&self) -> &TransformKind {
        &self.kind
    }

    pub fn bounds(&self) -> &ParamBox {
        &self.bounds
    }

    pub fn parameter_dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn is_function_offset(&self) -> bool {
        matches!(self.kind, TransformKind::FunctionOffset)
    }

    pub fn tag(&self) -> String {
        match &self.kind {
            TransformKind::FunctionOffset => "offset".into(),
            TransformKind::SpatialTranslation { .. } => "translation".into(),
            TransformKind::CoordinateRotation { plane } => format!("rotation({},{})", plane.0, plane.1),
            TransformKind::Composite(c) => {
                format!("composite({})", c.iter().map(TransformFamily::tag).collect::<Vec<_>>().join("+"))
            }
        }
    }

    /// Flatten into primitive steps, validating `theta` against the family.
    fn primitives(&self, theta: &[f64], out: &mut Vec<Transform>) -> Result<()> {
        if theta.len() != self.parameter_dim() {
            return Err(Error::Argument(format!(
                "family {} takes {} parameters, got {}",
                self.tag(),
                self.parameter_dim(),
                theta.len()
            )));
        }
        if let Some(bad) = theta.iter().find(|t| !t.is_finite()) {
            return Err(Error::Argument(format!("non-finite parameter {bad}")));
        }
        match &self.kind {
            TransformKind::FunctionOffset => out.push(Transform::Offset(theta[0])),
            TransformKind::SpatialTranslation { direction } => {
                out.push(Transform::Translate { direction: direction.clone(), amount: theta[0] })
            }
            TransformKind::CoordinateRotation { plane } => {
                out.push(Transform::Rotate { plane: *plane, angle: theta[0] })
            }
            TransformKind::Composite(children) => {
                let mut start = 0;
                for child in children {
                    let p = child.parameter_dim();
                    child.primitives(&theta[start..start + p], out)?;
                    start += p;
                }
            }
        }
        Ok(())
    }
}

/// One primitive transform with its parameter bound in.
#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    Offset(f64),
    Translate { direction: Vec<f64>, amount: f64 },
    Rotate { plane: (usize, usize), angle: f64 },
}

impl Transform {
    /// Map a point to its preimage in place. Offsets are not point maps.
    fn pull_back(&self, p: &mut [f64]) {
        match self {
            Transform::Offset(_) => {}
            Transform::Translate { direction, amount } => {
                for (v, u) in p.iter_mut().zip(direction) {
                    *v -= amount * u;
                }
            }
            Transform::Rotate { plane: (i, j), angle } => {
                let (s, c) = angle.sin_cos();
                let (xi, xj) = (p[*i], p[*j]);
                p[*i] = c * xi - s * xj;
                p[*j] = s * xi + c * xj;
            }
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            Transform::Offset(_) => Ok(()),
            Transform::Translate { direction, .. } if direction.len() != dim => {
                Err(Error::Shape { expected: dim, found: direction.len() })
            }
            Transform::Rotate { plane: (i, j), .. } if *i >= dim || *j >= dim => Err(Error::Argument(format!(
                "rotation plane ({i},{j}) outside dimension {dim}"
            ))),
            _ => Ok(()),
        }
    }

    fn describe(&self) -> String {
        match self {
            Transform::Offset(t) => format!("offset({t})"),
            Transform::Translate { direction, amount } => format!(
                "translate(direction=[{}],amount={amount})",
                direction.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
            ),
            Transform::Rotate { plane, angle } => format!("rotate({},{},{angle})", plane.0, plane.1),
        }
    }
}

/// A base set with a stack of transforms; `transforms[0]` is applied first.
#[derive(Debug, Clone)]
pub struct DecisionRule {
    base: BaseRule,
    transforms: Vec<Transform>,
    offset_total: f64,
}

impl DecisionRule {
    pub fn new(base: BaseRule) -> Result<Self> {
        match &base {
            BaseRule::Halfspace { normal, intercept } => {
                if normal.is_empty() || !intercept.is_finite() || normal.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Argument("halfspace needs a finite nonempty normal".into()));
                }
            }
            BaseRule::Quadratic { matrix, dim } => {
                if *dim == 0 || matrix.len() != dim * dim {
                    return Err(Error::Argument("quadratic form must be dim x dim".into()));
                }
            }
            BaseRule::Svm(_) | BaseRule::Constant(_) => {}
        }
        Ok(Self { base, transforms: Vec::new(), offset_total: 0.0 })
    }

    pub fn svm(model: SvmModel) -> Self {
        Self::from_svm(Arc::new(model))
    }

    pub fn from_svm(model: Arc<SvmModel>) -> Self {
        Self { base: BaseRule::Svm(model), transforms: Vec::new(), offset_total: 0.0 }
    }

    pub fn halfspace(normal: Vec<f64>, intercept: f64) -> Result<Self> {
        Self::new(BaseRule::Halfspace { normal, intercept })
    }

    pub fn quadratic(matrix: Vec<f64>, dim: usize) -> Result<Self> {
        Self::new(BaseRule::Quadratic { matrix, dim })
    }

    pub fn constant(member: bool) -> Self {
        Self { base: BaseRule::Constant(member), transforms: Vec::new(), offset_total: 0.0 }
    }

    pub fn base(&self) -> &BaseRule {
        &self.base
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn dim(&self) -> Option<usize> {
        self.base.dim()
    }

    /// `h(self, theta)` for the given family.
    pub fn with_transform(&self, family: &TransformFamily, theta: &[f64]) -> Result<Self> {
        let mut steps = Vec::new();
        family.primitives(theta, &mut steps)?;
        let mut out = self.clone();
        for step in steps {
            if let Transform::Offset(t) = step {
                if matches!(self.base, BaseRule::Constant(_)) {
                    return Err(Error::UnsupportedTransform(
                        "score offset needs a base with a decision value".into(),
                    ));
                }
                out.offset_total += t;
            }
            if let Some(d) = self.dim() {
                step.check_dim(d)?;
            }
            out.transforms.push(step);
        }
        Ok(out)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        match self.dim() {
            Some(d) if d != x.len() => Err(Error::Shape { expected: d, found: x.len() }),
            _ => Ok(()),
        }
    }

    /// Base decision value at the pulled-back point, and the summed offsets.
    /// The rule's decision value is `point_value + offset_total`.
    pub(crate) fn split_value(&self, x: &[f64], buf: &mut Vec<f64>) -> (Option<f64>, f64) {
        if matches!(self.base, BaseRule::Constant(_)) {
            return (None, 0.0);
        }
        let point = if self.transforms.iter().any(|t| !matches!(t, Transform::Offset(_))) {
            buf.clear();
            buf.extend_from_slice(x);
            for t in self.transforms.iter().rev() {
                t.pull_back(buf);
            }
            buf.as_slice()
        } else {
            x
        };
        (self.base.value(point), self.offset_total)
    }

    fn member_with(&self, x: &[f64], buf: &mut Vec<f64>) -> bool {
        match (&self.base, self.split_value(x, buf)) {
            (BaseRule::Constant(v), _) => *v,
            (_, (Some(v), off)) => v + off >= 0.0,
            (_, (None, _)) => unreachable!("non-constant bases have decision values"),
        }
    }

    /// Decision value of the transformed rule, `None` for constant sets.
    pub fn decision_value(&self, x: &[f64]) -> Result<Option<f64>> {
        self.check_point(x)?;
        let (v, off) = self.split_value(x, &mut Vec::new());
        Ok(v.map(|v| v + off))
    }

    pub fn membership(&self, x: &[f64]) -> Result<bool> {
        self.check_point(x)?;
        Ok(self.member_with(x, &mut Vec::new()))
    }

    /// `2 * I(x in G) - 1`.
    pub fn label(&self, x: &[f64]) -> Result<i8> {
        Ok(if self.membership(x)? { 1 } else { -1 })
    }

    /// Labels for every row of a feature matrix.
    pub fn labels_for(&self, features: &Features) -> Result<Vec<i8>> {
        if let Some(d) = self.dim() {
            if d != features.dim() {
                return Err(Error::Shape { expected: d, found: features.dim() });
            }
        }
        let mut buf = Vec::with_capacity(features.dim());
        Ok(features.rows().map(|x| if self.member_with(x, &mut buf) { 1 } else { -1 }).collect())
    }

    /// Sign of the decision value with ties to `+1`; constant sets give their label.
    pub fn predict(&self, x: &[f64]) -> Result<i8> {
        match self.decision_value(x)? {
            Some(v) => Ok(sign_label(v)),
            None => self.label(x),
        }
    }

    /// `(a, b)` with decision value `a . x + b` when the rule is an affine
    /// halfspace after all transforms.
    pub fn affine_form(&self) -> Option<(Vec<f64>, f64)> {
        let BaseRule::Halfspace { normal, intercept } = &self.base else {
            return None;
        };
        let mut a = normal.clone();
        let mut b = intercept + self.offset_total;
        for t in &self.transforms {
            match t {
                Transform::Offset(_) => {}
                Transform::Translate { direction, amount } => {
                    b -= amount * a.iter().zip(direction).map(|(x, y)| x * y).sum::<f64>();
                }
                Transform::Rotate { plane: (i, j), angle } => {
                    let (s, c) = angle.sin_cos();
                    let (ai, aj) = (a[*i], a[*j]);
                    a[*i] = c * ai + s * aj;
                    a[*j] = -s * ai + c * aj;
                }
            }
        }
        Some((a, b))
    }

    /// Text descriptor `base | step | step ...` for audit logs.
    pub fn descriptor(&self) -> String {
        let mut s = self.base.describe();
        for t in &self.transforms {
            write!(s, " | {}", t.describe()).expect("string write");
        }
        s
    }
}
