//! Sparse quadratic forms over binary and spin variables, generic over the
//! coefficient scalar. The compiler pipeline uses exact integers
//! ([`crate::Coeff`]); the spin form uses exact rationals obtained through
//! the x = (1 - z)/2 substitution.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::Zero;

/// E(x) = sum_i diag[i] x_i + sum_{i<j} offdiag[(i,j)] x_i x_j + offset,
/// x in {0,1}^n. Zero coefficients are pruned; off-diagonal keys are
/// upper-triangular (i < j).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadraticForm<T> {
    n: usize,
    diag: BTreeMap<usize, T>,
    offdiag: BTreeMap<(usize, usize), T>,
    offset: T,
}

impl<T> QuadraticForm<T>
where
    T: Copy + Zero + PartialEq + std::ops::AddAssign,
{
    pub fn new(n: usize) -> Self {
        QuadraticForm {
            n,
            diag: BTreeMap::new(),
            offdiag: BTreeMap::new(),
            offset: T::zero(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn diag(&self) -> &BTreeMap<usize, T> {
        &self.diag
    }

    pub fn offdiag(&self) -> &BTreeMap<(usize, usize), T> {
        &self.offdiag
    }

    pub fn add_offset(&mut self, v: T) {
        self.offset += v;
    }

    pub fn add_diag(&mut self, i: usize, v: T) {
        assert!(i < self.n, "variable index out of range");
        *self.diag.entry(i).or_insert_with(T::zero) += v;
    }

    pub fn add_offdiag(&mut self, i: usize, j: usize, v: T) {
        assert!(i != j, "off-diagonal term requires distinct variables");
        assert!(i < self.n && j < self.n, "variable index out of range");
        let key = if i < j { (i, j) } else { (j, i) };
        *self.offdiag.entry(key).or_insert_with(T::zero) += v;
    }

    /// Removes terms whose accumulated coefficient is zero.
    pub fn prune(&mut self) {
        self.diag.retain(|_, v| *v != T::zero());
        self.offdiag.retain(|_, v| *v != T::zero());
    }

    /// Number of nonzero (linear, quadratic) terms.
    pub fn term_counts(&self) -> (usize, usize) {
        (self.diag.len(), self.offdiag.len())
    }

    pub fn energy(&self, bits: &[bool]) -> T
    where
        T: std::ops::Add<Output = T>,
    {
        assert_eq!(bits.len(), self.n, "bitstring length mismatch");
        let mut e = self.offset;
        for (&i, &c) in &self.diag {
            if bits[i] {
                e += c;
            }
        }
        for (&(i, j), &c) in &self.offdiag {
            if bits[i] && bits[j] {
                e += c;
            }
        }
        e
    }
}

/// H(z) = sum_i h[i] z_i + sum_{i<j} j[(i,j)] z_i z_j + offset, z in {-1,+1}^n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinForm<T> {
    pub n: usize,
    pub h: BTreeMap<usize, T>,
    pub j: BTreeMap<(usize, usize), T>,
    pub offset: T,
}

impl<T> SpinForm<T>
where
    T: Clone + Zero + std::ops::AddAssign + std::ops::SubAssign,
{
    /// Spin energy; `spins[i]` true means z_i = +1, false means z_i = -1.
    pub fn energy(&self, spins: &[bool]) -> T {
        assert_eq!(spins.len(), self.n, "spin vector length mismatch");
        let mut e = self.offset.clone();
        for (&i, c) in &self.h {
            if spins[i] {
                e += c.clone();
            } else {
                e -= c.clone();
            }
        }
        for (&(i, j), c) in &self.j {
            if spins[i] == spins[j] {
                e += c.clone();
            } else {
                e -= c.clone();
            }
        }
        e
    }
}

impl<T> QuadraticForm<T>
where
    T: Copy + Zero + PartialEq + std::ops::AddAssign + Integer + num_traits::NumAssign,
{
    /// Converts to the spin form through x_i = (1 - z_i)/2. For any
    /// bitstring x and the corresponding spins z_i = 1 - 2 x_i the two
    /// energies are equal. Coefficients are exact rationals with
    /// denominator at most 4.
    pub fn to_spin(&self) -> SpinForm<Ratio<T>> {
        let mut h: BTreeMap<usize, Ratio<T>> = BTreeMap::new();
        let mut j: BTreeMap<(usize, usize), Ratio<T>> = BTreeMap::new();
        let mut offset = Ratio::from_integer(self.offset);

        let two = T::one() + T::one();
        let four = two + two;
        let half = |v: T| Ratio::new(v, two);
        let quarter = |v: T| Ratio::new(v, four);

        for (&i, &d) in &self.diag {
            // d * x = d/2 - (d/2) z
            offset += half(d);
            *h.entry(i).or_insert_with(Ratio::zero) -= half(d);
        }
        for (&(a, b), &q) in &self.offdiag {
            // q * x_a x_b = q/4 (1 - z_a - z_b + z_a z_b)
            offset += quarter(q);
            *h.entry(a).or_insert_with(Ratio::zero) -= quarter(q);
            *h.entry(b).or_insert_with(Ratio::zero) -= quarter(q);
            *j.entry((a, b)).or_insert_with(Ratio::zero) += quarter(q);
        }
        h.retain(|_, v| !v.is_zero());
        j.retain(|_, v| !v.is_zero());
        SpinForm {
            n: self.n,
            h,
            j,
            offset,
        }
    }
}
