//! Reaction-network and model data types, plus exact mass-action kinetics.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest stoichiometric coefficient the kinetics code accepts.
pub const MAX_STOICH: u32 = 9;

/// One chemical of the network. Indices are contiguous `0..N-1` and names
/// are unique within a network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Species {
    pub index: usize,
    pub name: String,
}

/// A single mass-action reaction. An empty product map encodes decay
/// (`v -> 0`), an empty reactant map a constant source (`0 -> v`).
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    /// Reactant stoichiometry, species index -> coefficient.
    pub reactants: BTreeMap<usize, u32>,
    /// Product stoichiometry, species index -> coefficient.
    pub products: BTreeMap<usize, u32>,
    /// Nonnegative rate constant.
    pub rate: f64,
}

impl Reaction {
    pub fn new(
        reactants: impl IntoIterator<Item = (usize, u32)>,
        products: impl IntoIterator<Item = (usize, u32)>,
        rate: f64,
    ) -> Self {
        Reaction {
            reactants: reactants.into_iter().collect(),
            products: products.into_iter().collect(),
            rate,
        }
    }

    /// Net stoichiometric change of species `k` when the reaction fires once.
    pub fn net_change(&self, k: usize) -> i64 {
        let p = self.products.get(&k).copied().unwrap_or(0) as i64;
        let r = self.reactants.get(&k).copied().unwrap_or(0) as i64;
        p - r
    }

    /// Sum of the reactant coefficients (the reaction order under mass action).
    pub fn order(&self) -> u32 {
        self.reactants.values().sum()
    }
}

/// A set of chemical species with mass-action reactions among them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReactionNetwork {
    pub species: Vec<Species>,
    pub reactions: Vec<Reaction>,
}

impl ReactionNetwork {
    /// Number of chemical species `N`.
    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    /// Checks the structural invariants: contiguous indices, unique names,
    /// valid stoichiometry references, coefficients within bounds,
    /// nonnegative rates, and no reaction that is empty on both sides.
    pub fn validate(&self) -> Result<()> {
        for (i, sp) in self.species.iter().enumerate() {
            if sp.index != i {
                return Err(Error::Validation(format!(
                    "species {:?} has index {} at position {}",
                    sp.name, sp.index, i
                )));
            }
            if self.species.iter().filter(|s| s.name == sp.name).count() > 1 {
                return Err(Error::Validation(format!(
                    "duplicate species name {:?}",
                    sp.name
                )));
            }
        }
        let n = self.n_species();
        for (r, reaction) in self.reactions.iter().enumerate() {
            if !(reaction.rate >= 0.0) {
                return Err(Error::Validation(format!(
                    "reaction {} has negative or non-finite rate {}",
                    r, reaction.rate
                )));
            }
            if reaction.reactants.is_empty() && reaction.products.is_empty() {
                return Err(Error::Validation(format!(
                    "reaction {} has empty reactant and product sets",
                    r
                )));
            }
            for (&k, &coeff) in reaction.reactants.iter().chain(reaction.products.iter()) {
                if k >= n {
                    return Err(Error::Validation(format!(
                        "reaction {} references species index {} (network has {})",
                        r, k, n
                    )));
                }
                if coeff == 0 || coeff > MAX_STOICH {
                    return Err(Error::Validation(format!(
                        "reaction {} has stoichiometric coefficient {} outside 1..={}",
                        r, coeff, MAX_STOICH
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mass-action kinetics `g(v)`:
    /// `g_k = sum_r (prod_r[k] - react_r[k]) * rate_r * prod_j v_j^react_r[j]`.
    ///
    /// Negative entries in `v` are accepted (Newton iterates probe them); the
    /// monomials are evaluated as-is.
    pub fn kinetics(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.n_species();
        if v.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: v.len(),
            });
        }
        let mut g = DVector::zeros(n);
        self.kinetics_into(v.as_slice(), g.as_mut_slice());
        Ok(g)
    }

    /// Allocation-free kinetics evaluation into a caller-provided buffer.
    /// Both slices must have length `N`; the simulator calls this per cell.
    pub fn kinetics_into(&self, v: &[f64], g: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n_species());
        debug_assert_eq!(g.len(), self.n_species());
        g.fill(0.0);
        for reaction in &self.reactions {
            let mut flux = reaction.rate;
            for (&j, &coeff) in &reaction.reactants {
                flux *= v[j].powi(coeff as i32);
            }
            for (&k, &coeff) in &reaction.products {
                g[k] += coeff as f64 * flux;
            }
            for (&k, &coeff) in &reaction.reactants {
                g[k] -= coeff as f64 * flux;
            }
        }
    }

    /// Exact Jacobian `J_kl = d g_k / d v_l` of [`Self::kinetics`], assembled
    /// monomial by monomial rather than by finite differences.
    pub fn jacobian(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.n_species();
        if v.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: v.len(),
            });
        }
        let mut jac = DMatrix::zeros(n, n);
        for reaction in &self.reactions {
            for (&l, &cl) in &reaction.reactants {
                // d flux / d v_l = rate * cl * v_l^(cl-1) * prod_{j != l} v_j^cj
                let mut dflux = reaction.rate * cl as f64 * v[l].powi(cl as i32 - 1);
                for (&j, &cj) in &reaction.reactants {
                    if j != l {
                        dflux *= v[j].powi(cj as i32);
                    }
                }
                for (&k, &ck) in &reaction.products {
                    jac[(k, l)] += ck as f64 * dflux;
                }
                for (&k, &ck) in &reaction.reactants {
                    jac[(k, l)] -= ck as f64 * dflux;
                }
            }
        }
        Ok(jac)
    }
}

/// Spatial domain on which the PDE system lives. The Neumann Laplacian
/// spectrum is closed-form on both kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainSpec {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DomainSpec::Interval { length } => length > 0.0 && length.is_finite(),
            DomainSpec::Rectangle { lx, ly } => {
                lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation("domain sides must be positive".into()))
        }
    }
}

/// Full parameter set of the chemotaxis system.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub network: ReactionNetwork,
    /// Production rates `alpha` of each chemical by the population.
    pub alpha: DVector<f64>,
    /// Chemotactic sensitivity `chi > 0`.
    pub chi: f64,
    /// Diffusion constant `D > 0` of the population density.
    pub cell_diffusion: f64,
    /// Diffusion constants `D_tilde > 0` of the chemicals.
    pub chem_diffusion: DVector<f64>,
    pub domain: DomainSpec,
    /// Index of the chemical whose gradient the population climbs.
    /// Defaults to the last species.
    pub chemoattractant: usize,
}

impl ModelSpec {
    pub fn n_species(&self) -> usize {
        self.network.n_species()
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.domain.validate()?;
        let n = self.n_species();
        if self.alpha.len() != n {
            return Err(Error::Validation(format!(
                "alpha has {} entries for {} species",
                self.alpha.len(),
                n
            )));
        }
        if self.chem_diffusion.len() != n {
            return Err(Error::Validation(format!(
                "D_tilde has {} entries for {} species",
                self.chem_diffusion.len(),
                n
            )));
        }
        if self.alpha.iter().any(|&a| !(a >= 0.0)) {
            return Err(Error::Validation("alpha entries must be >= 0".into()));
        }
        if !self.alpha.iter().any(|&a| a > 0.0) {
            return Err(Error::Validation("alpha has no positive entry".into()));
        }
        if !(self.chi > 0.0) || !self.chi.is_finite() {
            return Err(Error::Validation("chi must be positive".into()));
        }
        if !(self.cell_diffusion > 0.0) || !self.cell_diffusion.is_finite() {
            return Err(Error::Validation("D must be positive".into()));
        }
        if self.chem_diffusion.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::Validation("D_tilde entries must be positive".into()));
        }
        if self.chemoattractant >= n {
            return Err(Error::Validation(format!(
                "chemoattractant index {} out of range for {} species",
                self.chemoattractant, n
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{dimerization_net as dimerization, trimolecular_net as trimolecular};

    #[test]
    fn dimerization_kinetics_at_ones() {
        // g1 = -k1 v1^2 + k2 v2 - gamma1 v1, g2 = k1 v1^2 - k2 v2 - gamma2 v2
        let net = dimerization(1.0, 1.0, 1.0, 1.0);
        let g = net.kinetics(&DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_eq!(g.as_slice(), &[-1.0, -1.0]);
    }

    #[test]
    fn kinetics_vanishes_at_zero_without_sources() {
        let net = dimerization(1.0, 1.0, 1.0, 1.0);
        let g = net.kinetics(&DVector::zeros(2)).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn trimolecular_kinetics() {
        let net = trimolecular(2.0, 3.0, 1.0);
        let g = net
            .kinetics(&DVector::from_vec(vec![1.0, 2.0, 1.0]))
            .unwrap();
        assert_eq!(g.as_slice(), &[-2.0, -1.0, 1.0]);
    }

    #[test]
    fn trimolecular_matches_brute_force_evaluator() {
        // Independent oracle: per-species loop that recomputes every monomial
        // with repeated multiplication instead of powi.
        fn brute(net: &ReactionNetwork, v: &[f64]) -> Vec<f64> {
            let mut g = vec![0.0; net.n_species()];
            for (k, gk) in g.iter_mut().enumerate() {
                for r in &net.reactions {
                    let mut flux = r.rate;
                    for (&j, &c) in &r.reactants {
                        for _ in 0..c {
                            flux *= v[j];
                        }
                    }
                    *gk += r.net_change(k) as f64 * flux;
                }
            }
            g
        }
        let net = trimolecular(2.0, 3.0, 1.0);
        for v in [[1.0, 2.0, 1.0], [0.3, 0.7, 1.9], [2.5, 0.0, 4.0]] {
            let got = net.kinetics(&DVector::from_row_slice(&v)).unwrap();
            let want = brute(&net, &v);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn dimerization_jacobian() {
        // J = [-2 k1 v1 - g1, k2; 2 k1 v1, -k2 - g2]
        let net = dimerization(1.0, 1.0, 1.0, 1.0);
        let j = net.jacobian(&DVector::from_vec(vec![1.0, 0.5])).unwrap();
        assert_eq!(j[(0, 0)], -3.0);
        assert_eq!(j[(0, 1)], 1.0);
        assert_eq!(j[(1, 0)], 2.0);
        assert_eq!(j[(1, 1)], -2.0);
    }

    #[test]
    fn linear_network_has_constant_jacobian() {
        let net = ReactionNetwork {
            species: vec![
                Species { index: 0, name: "a".into() },
                Species { index: 1, name: "b".into() },
            ],
            reactions: vec![
                Reaction::new([(0, 1)], [(1, 1)], 2.0),
                Reaction::new([(0, 1)], [], 0.5),
                Reaction::new([(1, 1)], [], 1.5),
            ],
        };
        let j0 = net.jacobian(&DVector::from_vec(vec![0.1, 9.0])).unwrap();
        let j1 = net.jacobian(&DVector::from_vec(vec![5.0, -2.0])).unwrap();
        assert_eq!(j0, j1);
        // Off-diagonals nonnegative: unimolecular mass action is Metzler.
        assert!(j0[(0, 1)] >= 0.0 && j0[(1, 0)] >= 0.0);
    }

    #[test]
    fn trimolecular_conserves_bound_pair() {
        // The v2/v3 rows differ only by sign, so g2 + g3 = 0 identically.
        let net = trimolecular(2.0, 3.0, 1.0);
        for v in [[1.0, 2.0, 4.0 / 3.0], [0.2, 5.0, 0.9], [3.0, 0.1, 7.0]] {
            let g = net.kinetics(&DVector::from_row_slice(&v)).unwrap();
            assert!((g[1] + g[2]).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let net = dimerization(1.0, 1.0, 1.0, 1.0);
        assert!(matches!(
            net.kinetics(&DVector::zeros(3)),
            Err(Error::Dimension { expected: 2, got: 3 })
        ));
        assert!(net.jacobian(&DVector::zeros(1)).is_err());
    }

    #[test]
    fn validate_rejects_bad_networks() {
        let mut net = dimerization(1.0, 1.0, 1.0, 1.0);
        net.reactions[0].rate = -1.0;
        assert!(net.validate().is_err());

        let mut net = dimerization(1.0, 1.0, 1.0, 1.0);
        net.reactions.push(Reaction::new([], [], 1.0));
        assert!(net.validate().is_err());

        let mut net = dimerization(1.0, 1.0, 1.0, 1.0);
        net.reactions.push(Reaction::new([(7, 1)], [], 1.0));
        assert!(net.validate().is_err());

        let mut net = dimerization(1.0, 1.0, 1.0, 1.0);
        net.reactions[0].reactants.insert(0, 10);
        assert!(net.validate().is_err());
    }
}
