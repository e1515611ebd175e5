//! Registry of every claim the harness can issue a verdict on. Each verdict
//! carries the `reference` string of its claim, so the registry is the
//! single place where a measured number is tied back to the statement it
//! tests.
//!
//! ```
//! use hyperlab_harness::claims::{lookup, REGISTRY};
//!
//! for claim in REGISTRY {
//!     assert_eq!(lookup(claim.id).unwrap().reference, claim.reference);
//!     assert!(!claim.reference.is_empty());
//! }
//! assert!(lookup("no.such.claim").is_none());
//! ```

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Claim {
    pub id: &'static str,
    /// Subcommand that produces the verdict.
    pub command: &'static str,
    pub reference: &'static str,
    pub statement: &'static str,
}

macro_rules! claim {
    ($id:literal, $cmd:literal, $reference:literal, $statement:literal) => {
        Claim { id: $id, command: $cmd, reference: $reference, statement: $statement }
    };
}

pub const REGISTRY: &[Claim] = &[
    claim!("expand.rate.n0", "expand", "stationary-phase expansion, remainder after the leading term", "|oracle − 1-term expansion| decays at least like ρ^{-1}"),
    claim!("expand.rate.n1", "expand", "stationary-phase expansion, remainder after two terms", "|oracle − 2-term expansion| decays at least like ρ^{-2}"),
    claim!("expand.rate.n2", "expand", "stationary-phase expansion, remainder after three terms", "|oracle − 3-term expansion| decays at least like ρ^{-3}"),
    claim!("expand.leading", "expand", "stationary-phase expansion, leading coefficient", "fitted ρ⁰ coefficient equals f(v)"),
    claim!("expand.corrections", "expand", "recursive profile corrections", "closed-form corrections agree with fitted coefficients"),
    claim!("expand.runtime", "expand", "stationary-phase expansion, runtime budget", "the expansion sweep finishes within its budget"),
    claim!("outfield.rate", "outfield", "hyperboloid out-field convergence rate", "rephased smeared field approaches the shell operator like λ^{-1}"),
    claim!("outfield.vacuum", "outfield", "shell operator acting on the vacuum", "Ψ'Ω equals (2π)² f(P/m) E₀ ΨΩ"),
    claim!("outfield.transfer", "outfield", "momentum transfer of the out-field", "E(Δ₂) Ψ' E(Δ₁) = 0 when Δ₂ misses m·supp f + Δ₁"),
    claim!("rates.disjoint", "rates", "commutators of disjointly supported hyperboloid averages", "|[Ψ[λ₁,f₁], Ψ[λ₂,f₂]]| decays in λ₁λ₂ uniformly in the ratio"),
    claim!("rates.diagonal", "rates", "commutators of overlapping hyperboloid averages", "|[Ψ[λ,f₁], Ψ[λ,f₂]]| ≤ C ∫|f₁f₂|(v⁰)³dμ with one constant"),
    claim!("rates.product", "rates", "vacuum expectation of two time-averaged fields", "(Ω, Ψ₁*Ψ₂Ω) tends to the shell overlap"),
    claim!("rates.kernel", "rates", "independence of the time-averaging scale", "limits for two kernel scalings coincide"),
    claim!("rates.primed", "rates", "time-averaged field against the on-shell operator", "difference decays like Λ^{-1}"),
    claim!("decay.template", "decay", "spacelike decay of smeared commutators", "|C(a)| ≤ c/(r + |a⃗| − |a⁰|)^κ with the far end inside the template"),
    claim!("decay.boosted", "decay", "spacelike decay in a boosted frame", "the decay template holds for the boosted scan"),
    claim!("decay.preserved", "decay", "decay preserved under further smearing", "convolving with narrow, wide and zero smearings keeps the template"),
    claim!("cluster.wick", "cluster", "four-point cluster function of Wick squares", "|K| ≤ c₂d³/(|y⃗| − |y⁰|)² with one fitted c₂"),
    claim!("cluster.elementary", "cluster", "four-point cluster function of elementary fields", "K vanishes identically"),
    claim!("cluster.fock", "cluster", "cluster function by Wick contraction against Fock matrices", "closed form and truncated Fock products agree"),
    claim!("cluster.ahr", "cluster", "spacelike clustering bound for quadratic operators", "vacuum correlations quarter when the separation doubles"),
    claim!("cluster.ahr_annihilator", "cluster", "spacelike clustering with an annihilating operator", "the correlation vanishes when B₂ annihilates the vacuum"),
    claim!("geom.bounds", "geom", "velocity-bounded separation inequalities", "no sampled violation of the three inequalities"),
    claim!("geom.difference", "geom", "difference set of bounded-velocity hyperboloid points", "no sampled difference leaves the bounding region"),
    claim!("lemma.random", "lemma", "kernel projector bound for Aⁿ", "‖AP‖² ≤ (n−1)‖[A,A*]‖ and ‖A*P‖² ≤ n‖[A,A*]‖"),
    claim!("lemma.jordan", "lemma", "kernel projector bound, equality case", "the 2×2 Jordan block attains equality"),
];

pub fn lookup(id: &str) -> Option<&'static Claim> {
    REGISTRY.iter().find(|c| c.id == id)
}

pub fn for_command(command: &str) -> impl Iterator<Item = &'static Claim> + '_ {
    REGISTRY.iter().filter(move |c| c.command == command)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn ids_are_unique_and_commands_known() {
        let ids: HashSet<_> = REGISTRY.iter().map(|c| c.id).collect();
        assert_eq!(ids.len(), REGISTRY.len());
        let commands = ["expand", "outfield", "rates", "decay", "cluster", "geom", "lemma"];
        assert!(REGISTRY.iter().all(|c| commands.contains(&c.command) && c.id.starts_with(c.command)));
        for cmd in commands {
            assert!(for_command(cmd).count() > 0, "{cmd}");
        }
    }
}
