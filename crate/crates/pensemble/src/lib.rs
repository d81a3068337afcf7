//! Equilibrium ensembles of pure quantum system-bath states.
//!
//! A system weakly coupled to a finite bath is described here not by a single
//! density matrix but by a classical probability distribution over pure
//! composite states, tilted by a Boltzmann-like factor e^{-β'·⟨Ĥ⟩} whose
//! statistical inverse temperature β' is fixed by matching the Gibbs mean
//! energy. The crate provides the three legs of that program and keeps them
//! independently testable against each other:
//!
//! - [`sampler`]: Metropolis-Hastings chains over composite pure states with
//!   uniform sphere proposals, reduced-state statistics, and histograms.
//! - [`analytic`]: closed-form free energies and entropies of a reduced
//!   state against degenerate and thermal baths, confluent (repeated
//!   eigenvalue) handling, and the quadrature marginal P(z) that the
//!   histograms are compared to.
//! - [`landauer`]: heat bounds for state transformations built from those
//!   entropies, including the Bell-restoration and thermal-erasure sweeps.
//!
//! Supporting layers: [`quantum`] (states, reduced density matrices,
//! spectra), [`models`] (the spin-bath and truncated-oscillator benchmark
//! models and the statistical-temperature solver), [`simplex`] (flat-measure
//! Laplace transforms over the spectrum simplex), [`reduced`] (the factored,
//! cancellation-free evaluation of the interaction-matrix determinant),
//! [`linalg`] (log-domain scaled LU in f64 and double-double), and
//! [`experiment`] (config-driven runs with reproducible manifests, used by
//! the `pensemble` binary).
//!
//! Units: energies in eV, inverse temperatures in 1/eV, entropies in units
//! of k_B. All sampling is deterministic for a given seed; chains are
//! embarrassingly parallel with per-chain seed derivation.

pub mod analytic;
pub mod error;
pub mod experiment;
pub mod landauer;
pub mod linalg;
pub mod models;
pub mod quantum;
pub mod reduced;
pub mod sampler;
pub mod simplex;
