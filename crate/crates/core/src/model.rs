//! Shared data types: observed comparisons and the factored score matrix.

use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::loss::LossKind;

/// Sign of an observed comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    /// The user prefers `preferred` over `other` (+1).
    Agrees,
    /// The user prefers `other` over `preferred` (-1).
    Disagrees,
}

impl Label {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Agrees => 1.0,
            Label::Disagrees => -1.0,
        }
    }

    pub fn from_sign(sign: i8) -> Result<Self> {
        match sign {
            1 => Ok(Label::Agrees),
            -1 => Ok(Label::Disagrees),
            other => Err(Error::InvalidComparison(format!(
                "label must be +1 or -1, got {other}"
            ))),
        }
    }
}

/// One observation `(i, j, k)` with label `Y_ijk`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ComparisonTriple {
    pub user: u32,
    pub preferred: u32,
    pub other: u32,
    pub label: Label,
}

impl ComparisonTriple {
    /// A canonical (+1) triple: `user` prefers `preferred` over `other`.
    pub fn new(user: u32, preferred: u32, other: u32) -> Self {
        Self {
            user,
            preferred,
            other,
            label: Label::Agrees,
        }
    }

    pub fn with_label(user: u32, preferred: u32, other: u32, label: Label) -> Self {
        Self {
            user,
            preferred,
            other,
            label,
        }
    }

    /// Rewrites a -1 triple as the equivalent +1 triple with the items swapped.
    pub fn canonical(self) -> Self {
        match self.label {
            Label::Agrees => self,
            Label::Disagrees => Self::new(self.user, self.other, self.preferred),
        }
    }
}

/// Compressed row index: `positions[offsets[r]..offsets[r + 1]]` for row `r`.
#[derive(Debug, Clone, Default)]
struct Csr {
    offsets: Vec<usize>,
    positions: Vec<u32>,
}

impl Csr {
    fn build(rows: usize, entries: impl Iterator<Item = (usize, u32)> + Clone) -> Self {
        let mut offsets = vec![0usize; rows + 1];
        for (r, _) in entries.clone() {
            offsets[r + 1] += 1;
        }
        for r in 0..rows {
            offsets[r + 1] += offsets[r];
        }
        let mut cursor = offsets.clone();
        let mut positions = vec![0u32; offsets[rows]];
        for (r, pos) in entries {
            positions[cursor[r]] = pos;
            cursor[r] += 1;
        }
        Self { offsets, positions }
    }

    #[inline]
    fn row(&self, r: usize) -> &[u32] {
        &self.positions[self.offsets[r]..self.offsets[r + 1]]
    }
}

/// The observation set with per-user and per-item indexes.
///
/// Read-only after construction. Optionally carries, for every triple, the
/// absolute rating gap it was derived from (used by the restricted
/// pairwise-accuracy metric).
#[derive(Debug, Clone)]
pub struct ComparisonSet {
    d1: usize,
    d2: usize,
    triples: Vec<ComparisonTriple>,
    gaps: Option<Vec<f64>>,
    by_user: Csr,
    by_item: Csr,
}

impl ComparisonSet {
    pub fn new(d1: usize, d2: usize, triples: Vec<ComparisonTriple>) -> Result<Self> {
        if triples.len() > u32::MAX as usize {
            return Err(Error::InvalidComparison(format!(
                "{} comparisons exceed the 32-bit position index",
                triples.len()
            )));
        }
        for (pos, t) in triples.iter().enumerate() {
            if t.user as usize >= d1 || t.preferred as usize >= d2 || t.other as usize >= d2 {
                return Err(Error::IndexOutOfBounds(format!(
                    "comparison {pos} = ({}, {}, {}) outside {d1} users x {d2} items",
                    t.user, t.preferred, t.other
                )));
            }
            if t.preferred == t.other {
                return Err(Error::InvalidComparison(format!(
                    "comparison {pos} compares item {} with itself",
                    t.preferred
                )));
            }
        }
        let by_user = Csr::build(
            d1,
            triples
                .iter()
                .enumerate()
                .map(|(p, t)| (t.user as usize, p as u32)),
        );
        let by_item = Csr::build(
            d2,
            triples.iter().enumerate().flat_map(|(p, t)| {
                [
                    (t.preferred as usize, p as u32),
                    (t.other as usize, p as u32),
                ]
            }),
        );
        Ok(Self {
            d1,
            d2,
            triples,
            gaps: None,
            by_user,
            by_item,
        })
    }

    /// Attaches per-triple rating gaps.
    pub fn with_gaps(mut self, gaps: Vec<f64>) -> Result<Self> {
        if gaps.len() != self.triples.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} gaps for {} comparisons",
                gaps.len(),
                self.triples.len()
            )));
        }
        self.gaps = Some(gaps);
        Ok(self)
    }

    /// Swaps every -1 triple into its +1 form. Indexes are unchanged because
    /// the same positions still involve the same user and item pair.
    pub fn canonicalize(mut self) -> Self {
        for t in &mut self.triples {
            *t = t.canonical();
        }
        self
    }

    pub fn is_canonical(&self) -> bool {
        self.triples.iter().all(|t| t.label == Label::Agrees)
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[ComparisonTriple] {
        &self.triples
    }

    pub fn gaps(&self) -> Option<&[f64]> {
        self.gaps.as_deref()
    }

    /// Positions of user `i`'s comparisons (Ω_i).
    pub fn user_positions(&self, user: usize) -> &[u32] {
        self.by_user.row(user)
    }

    /// Positions of comparisons in which `item` is either side (Ω^(j)).
    pub fn item_positions(&self, item: usize) -> &[u32] {
        self.by_item.row(item)
    }

    pub fn user_count(&self, user: usize) -> usize {
        self.user_positions(user).len()
    }

    pub fn item_count(&self, item: usize) -> usize {
        self.item_positions(item).len()
    }
}

/// The factored score matrix `X = U V^T`.
///
/// Scores are computed on demand; [`FactorPair::to_dense`] exists only for
/// small analyses where `d1 * d2` is tiny.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    users: Array2<f64>,
    items: Array2<f64>,
}

impl FactorPair {
    pub fn new(users: Array2<f64>, items: Array2<f64>) -> Result<Self> {
        if users.ncols() != items.ncols() || users.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "user factors have rank {}, item factors rank {}",
                users.ncols(),
                items.ncols()
            )));
        }
        if users.iter().chain(items.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("factor entries must be finite".into()));
        }
        Ok(Self {
            users: users.as_standard_layout().into_owned(),
            items: items.as_standard_layout().into_owned(),
        })
    }

    pub fn zeros(d1: usize, d2: usize, rank: usize) -> Self {
        Self {
            users: Array2::zeros((d1, rank)),
            items: Array2::zeros((d2, rank)),
        }
    }

    /// I.i.d. `N(0, scale^2)` entries in both factors.
    pub fn gaussian<R: Rng + ?Sized>(
        d1: usize,
        d2: usize,
        rank: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        Self {
            users: gaussian_matrix(d1, rank, scale, rng),
            items: gaussian_matrix(d2, rank, scale, rng),
        }
    }

    pub fn rank(&self) -> usize {
        self.users.ncols()
    }

    pub fn d1(&self) -> usize {
        self.users.nrows()
    }

    pub fn d2(&self) -> usize {
        self.items.nrows()
    }

    #[inline]
    pub fn user(&self, i: usize) -> &[f64] {
        let r = self.rank();
        &self.users.as_slice().expect("standard layout")[i * r..(i + 1) * r]
    }

    #[inline]
    pub fn item(&self, j: usize) -> &[f64] {
        let r = self.rank();
        &self.items.as_slice().expect("standard layout")[j * r..(j + 1) * r]
    }

    pub fn users(&self) -> ArrayView2<'_, f64> {
        self.users.view()
    }

    pub fn items(&self) -> ArrayView2<'_, f64> {
        self.items.view()
    }

    pub fn users_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.users.view_mut()
    }

    pub fn items_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.items.view_mut()
    }

    pub(crate) fn user_slice_mut(&mut self) -> &mut [f64] {
        self.users.as_slice_mut().expect("standard layout")
    }

    pub(crate) fn item_slice_mut(&mut self) -> &mut [f64] {
        self.items.as_slice_mut().expect("standard layout")
    }

    pub(crate) fn slices_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (
            self.users.as_slice_mut().expect("standard layout"),
            self.items.as_slice_mut().expect("standard layout"),
        )
    }

    #[inline]
    pub fn score(&self, user: usize, item: usize) -> f64 {
        dot(self.user(user), self.item(item))
    }

    /// Scores of one user against every item.
    pub fn user_scores(&self, user: usize) -> Vec<f64> {
        let u = self.user(user);
        (0..self.d2()).map(|j| dot(u, self.item(j))).collect()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        self.users.dot(&self.items.t())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            users: &self.users * c,
            items: &self.items * c,
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.users
            .iter()
            .chain(self.items.iter())
            .map(|v| v * v)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.users
            .iter()
            .chain(self.items.iter())
            .all(|v| v.is_finite())
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    scale: f64,
    rng: &mut R,
) -> Array2<f64> {
    let normal = Normal::new(0.0, scale).expect("finite positive scale");
    Array2::from_shape_simple_fn((rows, cols), || normal.sample(rng))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Y_ijk * u_i^T (v_j - v_k)`.
pub fn margin(factors: &FactorPair, triple: &ComparisonTriple) -> Result<f64> {
    let (i, j, k) = (
        triple.user as usize,
        triple.preferred as usize,
        triple.other as usize,
    );
    if i >= factors.d1() || j >= factors.d2() || k >= factors.d2() {
        return Err(Error::IndexOutOfBounds(format!(
            "({i}, {j}, {k}) outside {} users x {} items",
            factors.d1(),
            factors.d2()
        )));
    }
    Ok(margin_unchecked(factors, triple))
}

#[inline]
pub(crate) fn margin_unchecked(factors: &FactorPair, t: &ComparisonTriple) -> f64 {
    let u = factors.user(t.user as usize);
    let vj = factors.item(t.preferred as usize);
    let vk = factors.item(t.other as usize);
    let raw: f64 = u
        .iter()
        .zip(vj.iter().zip(vk))
        .map(|(a, (b, c))| a * (b - c))
        .sum();
    t.label.sign() * raw
}

pub(crate) fn check_dims(factors: &FactorPair, data: &ComparisonSet) -> Result<()> {
    if factors.d1() != data.d1() || factors.d2() != data.d2() {
        return Err(Error::DimensionMismatch(format!(
            "factors are {}x{} but comparisons cover {} users x {} items",
            factors.d1(),
            factors.d2(),
            data.d1(),
            data.d2()
        )));
    }
    Ok(())
}

/// `sum L(Y u_i^T (v_j - v_k)) + lambda/2 (|U|_F^2 + |V|_F^2)`.
pub fn primal_objective(
    factors: &FactorPair,
    data: &ComparisonSet,
    loss: LossKind,
    lambda: f64,
) -> Result<f64> {
    check_dims(factors, data)?;
    let data_term: f64 = data
        .triples()
        .iter()
        .map(|t| loss.value(margin_unchecked(factors, t)))
        .sum();
    Ok(data_term + 0.5 * lambda * factors.frobenius_sq())
}
