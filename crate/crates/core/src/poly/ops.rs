use super::polynomial::HPolynomial;
use crate::error::{usage, Result};
use crate::group::{FieldId, GroupPoint};

fn field_image(field: FieldId, p: &HPolynomial) -> HPolynomial {
    let n = p.n();
    let (a, twist) = field.parts(n);
    let mut out = p.partial(a);
    if let Some((c, s)) = twist {
        let dz = p.partial(2 * n).mul_var(c).scale(0.5 * s);
        out = &out + &dz;
    }
    out
}

/// Exact image of `P` under one of the six invariant fields.
pub fn poly_apply_field(field: FieldId, p: &HPolynomial) -> Result<HPolynomial> {
    field.validate(p.n())?;
    Ok(field_image(field, p).pruned())
}

/// `L P = ½ Σ_i (X_i² + Y_i²) P`. Lowers the weight by at least two.
pub fn generator(p: &HPolynomial) -> HPolynomial {
    let mut acc = HPolynomial::zero(p.n());
    for f in FieldId::horizontal(p.n()) {
        let once = field_image(f, p);
        acc = &acc + &field_image(f, &once);
    }
    acc.scale(0.5).pruned()
}

/// `P ∘ A`: `x → −x`, `y → −y`, `z → z`.
pub fn mirror(p: &HPolynomial) -> HPolynomial {
    let n = p.n();
    let terms = p.terms().map(|(e, c)| {
        let odd = e[..2 * n].iter().sum::<u32>() % 2 == 1;
        (e.to_vec(), if odd { -c } else { c })
    });
    HPolynomial::from_terms(n, terms).expect("same layout")
}

fn substitute(p: &HPolynomial, subs: &[HPolynomial]) -> HPolynomial {
    let n = p.n();
    let mut powers: Vec<Vec<HPolynomial>> = subs
        .iter()
        .map(|s| vec![HPolynomial::constant(n, 1.0), s.clone()])
        .collect();
    let mut out = HPolynomial::zero(n);
    for (e, c) in p.terms() {
        let mut term = HPolynomial::constant(n, c);
        for (var, &k) in e.iter().enumerate() {
            let k = k as usize;
            while powers[var].len() <= k {
                let next = &powers[var][powers[var].len() - 1] * &subs[var];
                powers[var].push(next);
            }
            if k > 0 {
                term = &term * &powers[var][k];
            }
        }
        out = &out + &term;
    }
    out.pruned()
}

fn translation_subs(by: &GroupPoint, left: bool) -> Vec<HPolynomial> {
    let n = by.n();
    let mut subs = Vec::with_capacity(2 * n + 1);
    for i in 0..n {
        subs.push(&HPolynomial::coordinate(n, i) + &HPolynomial::constant(n, by.x[i]));
    }
    for i in 0..n {
        subs.push(&HPolynomial::coordinate(n, n + i) + &HPolynomial::constant(n, by.y[i]));
    }
    // z-component of p ⋆ q (left) or q ⋆ p (right) as a polynomial in q.
    let sign = if left { 1.0 } else { -1.0 };
    let mut z = &HPolynomial::coordinate(n, 2 * n) + &HPolynomial::constant(n, by.z);
    for i in 0..n {
        z = &z + &HPolynomial::coordinate(n, n + i).scale(0.5 * sign * by.x[i]);
        z = &z + &HPolynomial::coordinate(n, i).scale(-0.5 * sign * by.y[i]);
    }
    subs.push(z);
    subs
}

/// `q ↦ P(p ⋆ q)`.
pub fn left_translate(poly: &HPolynomial, by: &GroupPoint) -> Result<HPolynomial> {
    if by.n() != poly.n() {
        return usage(format!("translate on H_{} by a point of H_{}", poly.n(), by.n()));
    }
    Ok(substitute(poly, &translation_subs(by, true)))
}

/// `q ↦ P(q ⋆ p)`.
pub fn right_translate(poly: &HPolynomial, by: &GroupPoint) -> Result<HPolynomial> {
    if by.n() != poly.n() {
        return usage(format!("translate on H_{} by a point of H_{}", poly.n(), by.n()));
    }
    Ok(substitute(poly, &translation_subs(by, false)))
}

pub fn poly_eval(poly: &HPolynomial, p: &GroupPoint) -> Result<f64> {
    poly.eval(p)
}
