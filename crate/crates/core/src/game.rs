//! Causal games over finite alphabets: exhaustive causal bounds and the
//! quantum value of the guess game on a bipartite process.
//!
//! A causal strategy unravels the nodes one at a time: some party goes
//! first, its outcome depends only on its own setting, and everything later
//! may depend on all settings and outcomes so far, including the choice of
//! who acts next. The bound maximises the success probability over all
//! deterministic strategies of this shape; settings are uniform.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::comb::Node;
use crate::error::{Error, Result};
use crate::mpm::{validate_mpm, Scenario};
use crate::operator::LabeledOperator;
use crate::process::{born_probability, cj_from_kraus};

const MAX_PARTIES: usize = 3;
const MAX_ALPHABET: usize = 8;

/// One party of a game: its setting and outcome alphabet sizes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GameParty {
    pub label: String,
    pub settings: usize,
    pub outcomes: usize,
}

/// A game with a success predicate given as a truth table, row-major over
/// all settings then all outcomes (last index fastest).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GameSpec {
    pub parties: Vec<GameParty>,
    pub success: Vec<u8>,
}

impl GameSpec {
    pub fn validate(&self) -> Result<()> {
        if self.parties.is_empty() {
            return Err(Error::TooLarge("game with no parties".to_string()));
        }
        if self.parties.len() > MAX_PARTIES {
            return Err(Error::TooLarge(format!(
                "{} parties (limit {MAX_PARTIES})",
                self.parties.len()
            )));
        }
        for p in &self.parties {
            if p.settings == 0 || p.outcomes == 0 {
                return Err(Error::TooLarge(format!("empty alphabet for `{}`", p.label)));
            }
            if p.settings > MAX_ALPHABET || p.outcomes > MAX_ALPHABET {
                return Err(Error::TooLarge(format!(
                    "alphabet of `{}` exceeds {MAX_ALPHABET}",
                    p.label
                )));
            }
        }
        let want: usize = self
            .parties
            .iter()
            .map(|p| p.settings * p.outcomes)
            .product();
        if self.success.len() != want {
            return Err(Error::Parse(format!(
                "success table has {} entries, expected {}",
                self.success.len(),
                want
            )));
        }
        Ok(())
    }

    pub fn success(&self, settings: &[usize], outcomes: &[usize]) -> bool {
        let mut idx = 0usize;
        for (k, p) in self.parties.iter().enumerate() {
            idx = idx * p.settings + settings[k];
        }
        for (k, p) in self.parties.iter().enumerate() {
            idx = idx * p.outcomes + outcomes[k];
        }
        self.success[idx] != 0
    }

    /// The lazy guess game: party A receives a bit `a` and a direction bit
    /// `a'` (encoded as setting `a + 2 a'`), party B receives a bit `b`.
    /// When `a' = 0`, A must guess `b`; when `a' = 1`, B must guess `a`.
    pub fn lazy_guess() -> GameSpec {
        let parties = vec![
            GameParty {
                label: "A".to_string(),
                settings: 4,
                outcomes: 2,
            },
            GameParty {
                label: "B".to_string(),
                settings: 2,
                outcomes: 2,
            },
        ];
        let mut success = Vec::with_capacity(4 * 2 * 2 * 2);
        for sa in 0..4 {
            let a = sa & 1;
            let dir = sa >> 1;
            for b in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        let win = if dir == 0 { x == b } else { y == a };
                        success.push(win as u8);
                    }
                }
            }
        }
        GameSpec { parties, success }
    }
}

fn bound_recurse(
    game: &GameSpec,
    placed: &mut Vec<bool>,
    settings: &mut Vec<usize>,
    outcomes: &mut Vec<usize>,
) -> f64 {
    let next: Vec<usize> = (0..game.parties.len()).filter(|&p| !placed[p]).collect();
    if next.is_empty() {
        return game.success(settings, outcomes) as u8 as f64;
    }
    let mut best = f64::NEG_INFINITY;
    for p in next {
        placed[p] = true;
        let n_s = game.parties[p].settings;
        let mut avg = 0.0;
        for s in 0..n_s {
            settings[p] = s;
            let mut best_outcome = f64::NEG_INFINITY;
            for o in 0..game.parties[p].outcomes {
                outcomes[p] = o;
                let v = bound_recurse(game, placed, settings, outcomes);
                best_outcome = best_outcome.max(v);
            }
            avg += best_outcome / n_s as f64;
        }
        placed[p] = false;
        best = best.max(avg);
    }
    best
}

/// Maximum success probability over deterministic causal strategies, by
/// exhaustive enumeration of acting orders, response functions, and
/// adaptive continuations.
pub fn causal_bound_bruteforce(game: &GameSpec) -> Result<f64> {
    game.validate()?;
    let n = game.parties.len();
    let mut placed = vec![false; n];
    let mut settings = vec![0usize; n];
    let mut outcomes = vec![0usize; n];
    Ok(bound_recurse(
        game,
        &mut placed,
        &mut settings,
        &mut outcomes,
    ))
}

fn ket(coeffs: [Complex64; 2]) -> DMatrix<Complex64> {
    DMatrix::from_column_slice(2, 1, &coeffs)
}

fn z_ket(bit: usize) -> DMatrix<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    if bit == 0 {
        ket([one, zero])
    } else {
        ket([zero, one])
    }
}

fn x_ket(bit: usize) -> DMatrix<Complex64> {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    if bit == 0 {
        ket([h, h])
    } else {
        ket([h, -h])
    }
}

/// CJ branch of "project the input onto `proj`, prepare `prep` on the
/// output".
fn measure_prepare(
    node_in: &crate::operator::Subsystem,
    node_out: &crate::operator::Subsystem,
    proj: &DMatrix<Complex64>,
    prep: &DMatrix<Complex64>,
) -> Result<LabeledOperator> {
    let k = prep * proj.adjoint();
    cj_from_kraus(vec![node_in.clone()], vec![node_out.clone()], &[k])
}

/// CJ branch of "project the input onto `proj`, emit the maximally mixed
/// state".
fn measure_discard(
    node_in: &crate::operator::Subsystem,
    node_out: &crate::operator::Subsystem,
    proj: &DMatrix<Complex64>,
) -> Result<LabeledOperator> {
    let scale = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let k0 = (z_ket(0) * proj.adjoint()).map(|z| z * scale);
    let k1 = (z_ket(1) * proj.adjoint()).map(|z| z * scale);
    cj_from_kraus(vec![node_in.clone()], vec![node_out.clone()], &[k0, k1])
}

/// Success probability of the lazy guess game on a bipartite single-node
/// process with qubit systems, under the canonical measure-and-reprepare
/// strategies: B always measures its input in `z` (its outcome is its
/// guess) and re-prepares its setting in `z`; A measures in `z` and guesses
/// when the direction bit is 0, and measures in `x` while `z`-encoding
/// `a (+) outcome` when it is 1.
pub fn ocb_game_value(w: &LabeledOperator, a_node: &Node, b_node: &Node) -> Result<f64> {
    for node in [a_node, b_node] {
        if node.ins.len() != 1 || node.outs.len() != 1 {
            return Err(Error::InvalidProcess(
                "guess game needs single-system node sides".to_string(),
            ));
        }
        for s in node.subsystems() {
            if s.dim != 2 {
                return Err(Error::InvalidProcess(format!(
                    "guess game needs qubit systems, `{}` has dim {}",
                    s.label, s.dim
                )));
            }
        }
    }
    let scenario = Scenario::new(vec![
        crate::comb::NodeSeq::new("A", vec![a_node.clone()])?,
        crate::comb::NodeSeq::new("B", vec![b_node.clone()])?,
    ])?;
    let verdict = validate_mpm(w, &scenario, 1e-9)?;
    if !verdict.valid {
        let failed: Vec<&str> = verdict
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        return Err(Error::InvalidProcess(format!(
            "not a valid bipartite process: fails {}",
            failed.join(", ")
        )));
    }
    let (a_in, a_out) = (&a_node.ins[0], &a_node.outs[0]);
    let (b_in, b_out) = (&b_node.ins[0], &b_node.outs[0]);

    let mut total = 0.0;
    for a in 0..2usize {
        for dir in 0..2usize {
            for b in 0..2usize {
                // B: measure z (outcome beta = guess), re-prepare |b>_z
                let b_branches: Vec<LabeledOperator> = (0..2)
                    .map(|beta| {
                        let proj = z_ket(beta);
                        measure_prepare(b_in, b_out, &proj, &z_ket(b))
                    })
                    .collect::<Result<_>>()?;
                let mut p_win = 0.0;
                for beta in 0..2usize {
                    for alpha in 0..2usize {
                        let a_branch = if dir == 0 {
                            // measure z, guess x = alpha, discard output
                            measure_discard(a_in, a_out, &z_ket(alpha))?
                        } else {
                            // measure x, z-encode a (+) alpha
                            measure_prepare(a_in, a_out, &x_ket(alpha), &z_ket(a ^ alpha))?
                        };
                        let p = born_probability(w, &[&a_branch, &b_branches[beta]])?;
                        let win = if dir == 0 { alpha == b } else { beta == a };
                        if win {
                            p_win += p;
                        }
                    }
                }
                total += p_win / 8.0;
            }
        }
    }
    Ok(total)
}
