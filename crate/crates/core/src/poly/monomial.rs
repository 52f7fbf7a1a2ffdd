use std::cmp::Ordering;

/// Exponent multi-index of a monomial.
///
/// Ordered graded-lexicographically: total degree first, then exponent
/// vectors lexicographically, so that `x1 > x2 > ... > 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Monomial(exps)
    }

    pub fn one(num_vars: usize) -> Self {
        Monomial(vec![0; num_vars])
    }

    pub fn var(num_vars: usize, i: usize) -> Self {
        let mut e = vec![0; num_vars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exps(&self) -> &[u32] {
        &self.0
    }

    pub fn num_vars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `d/dx_i` of the monomial: the multiplicity and the lowered monomial.
    pub fn derive(&self, i: usize) -> Option<(u32, Monomial)> {
        let e = self.0[i];
        if e == 0 {
            return None;
        }
        let mut lowered = self.0.clone();
        lowered[i] -= 1;
        Some((e, Monomial(lowered)))
    }

    /// Re-index into a larger variable space: variable `j` maps to `offset + j`.
    pub fn embed(&self, num_vars: usize, offset: usize) -> Monomial {
        let mut e = vec![0; num_vars];
        e[offset..offset + self.0.len()].copy_from_slice(&self.0);
        Monomial(e)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All monomials in `num_vars` variables of total degree exactly `degree`,
/// in ascending graded-lex order.
pub fn monomials_of_degree(num_vars: usize, degree: u32) -> Vec<Monomial> {
    fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
        let n = cur.len();
        if pos == n - 1 {
            cur[pos] = left;
            out.push(Monomial(cur.clone()));
            return;
        }
        for e in 0..=left {
            cur[pos] = e;
            rec(pos + 1, left - e, cur, out);
        }
    }
    if num_vars == 0 {
        return if degree == 0 { vec![Monomial(vec![])] } else { vec![] };
    }
    let mut out = Vec::new();
    rec(0, degree, &mut vec![0; num_vars], &mut out);
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lex_order() {
        let one = Monomial::one(2);
        let x1 = Monomial::var(2, 0);
        let x2 = Monomial::var(2, 1);
        let x1x2 = x1.mul(&x2);
        assert!(one < x2 && x2 < x1 && x1 < x1x2);
    }

    #[test]
    fn degree_enumeration_counts() {
        // C(k + n - 1, n - 1)
        assert_eq!(monomials_of_degree(3, 2).len(), 6);
        assert_eq!(monomials_of_degree(2, 5).len(), 6);
        assert_eq!(monomials_of_degree(1, 4).len(), 1);
        assert!(monomials_of_degree(3, 3).iter().all(|m| m.degree() == 3));
    }
}
