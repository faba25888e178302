//! Binary Merkle trees over truncated digests.
//!
//! Leaves are `H(payload)` and parents are `H(left ‖ right)` with no
//! domain-separation prefix, so a leaf payload that happens to equal the
//! concatenation of two child digests yields the same node value. That is the
//! classic second-preimage caveat of unprefixed trees; it is left as is here.
//!
//! Any level with an odd number of nodes is padded by repeating its last node,
//! and a padded node's proof sibling is its own digest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::{hash_bytes, hash_concat, Digest, HashSpec, OracleState};

/// Where a sibling sits relative to the running node when hashing upward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofStep {
    pub sibling: Digest,
    pub sibling_side: Side,
}

/// Authentication path for one leaf.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerkleProof {
    pub leaf_index: usize,
    pub steps: Vec<ProofStep>,
}

impl MerkleProof {
    /// Path length `m`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn siblings(&self) -> impl Iterator<Item = &Digest> {
        self.steps.iter().map(|s| &s.sibling)
    }

    pub fn to_json(&self, bits: u32) -> Result<String> {
        if let Some(s) = self.steps.iter().find(|s| s.sibling.bit_length() != bits) {
            return Err(Error::Usage(format!(
                "proof sibling has {} bits, expected {bits}",
                s.sibling.bit_length()
            )));
        }
        let doc = ProofDoc {
            version: PROOF_VERSION,
            bits,
            leaf_index: self.leaf_index,
            steps: self
                .steps
                .iter()
                .map(|s| StepDoc {
                    sibling: s.sibling.to_hex(),
                    side: s.sibling_side,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Parses a proof document; returns the proof together with its bit width.
    pub fn from_json(s: &str) -> Result<(Self, u32)> {
        let doc: ProofDoc =
            serde_json::from_str(s).map_err(|e| Error::Parse(format!("malformed proof JSON: {e}")))?;
        if doc.version != PROOF_VERSION {
            return Err(Error::Parse(format!(
                "unsupported proof version {}",
                doc.version
            )));
        }
        if doc.bits == 0 || doc.bits > crate::hashing::SHA256_MAX_BITS {
            return Err(Error::Parse(format!("invalid bit width {}", doc.bits)));
        }
        let steps = doc
            .steps
            .into_iter()
            .map(|s| {
                Ok(ProofStep {
                    sibling: Digest::from_hex(&s.sibling, doc.bits)?,
                    sibling_side: s.side,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((
            Self {
                leaf_index: doc.leaf_index,
                steps,
            },
            doc.bits,
        ))
    }
}

const PROOF_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProofDoc {
    version: u32,
    bits: u32,
    leaf_index: usize,
    steps: Vec<StepDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepDoc {
    sibling: String,
    side: Side,
}

/// A fully materialized tree. `levels[0]` holds leaf digests and the last
/// level holds only the root. Every level below the root has even length.
#[derive(Clone, Debug)]
pub struct MerkleTree {
    spec: HashSpec,
    leaf_count: usize,
    levels: Vec<Vec<Digest>>,
}

/// Builds a tree over `leaves` using a stateless hash.
pub fn build_tree<T: AsRef<[u8]>>(leaves: &[T], spec: HashSpec) -> Result<MerkleTree> {
    build_tree_with(leaves, spec, None)
}

/// Like [`build_tree`], but threads an oracle through for ideal-oracle specs.
pub fn build_tree_with<T: AsRef<[u8]>>(
    leaves: &[T],
    spec: HashSpec,
    mut oracle: Option<&mut OracleState>,
) -> Result<MerkleTree> {
    if leaves.is_empty() {
        return Err(Error::Usage("cannot build a Merkle tree with no leaves".into()));
    }
    let leaf_digests = leaves
        .iter()
        .map(|l| hash_bytes(l.as_ref(), &spec, oracle.as_deref_mut()))
        .collect::<Result<Vec<_>>>()?;
    let levels = build_levels(leaf_digests, &spec, oracle)?;
    Ok(MerkleTree {
        spec,
        leaf_count: leaves.len(),
        levels,
    })
}

fn build_levels(
    leaf_digests: Vec<Digest>,
    spec: &HashSpec,
    mut oracle: Option<&mut OracleState>,
) -> Result<Vec<Vec<Digest>>> {
    let mut levels = vec![leaf_digests];
    loop {
        let current = levels.last_mut().expect("at least one level");
        if current.len() == 1 {
            break;
        }
        if current.len() % 2 == 1 {
            let last = current.last().expect("non-empty").clone();
            current.push(last);
        }
        let next = current
            .chunks_exact(2)
            .map(|pair| hash_concat(&pair[0], &pair[1], spec, oracle.as_deref_mut()))
            .collect::<Result<Vec<_>>>()?;
        levels.push(next);
    }
    Ok(levels)
}

impl MerkleTree {
    pub fn spec(&self) -> &HashSpec {
        &self.spec
    }

    /// Number of real (non-duplicated) leaves.
    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn levels(&self) -> &[Vec<Digest>] {
        &self.levels
    }

    pub fn root(&self) -> &Digest {
        &self.levels.last().expect("tree has a root")[0]
    }

    /// Number of levels above the leaves, i.e. the proof length.
    pub fn height(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn generate_proof(&self, index: usize) -> Result<MerkleProof> {
        if index >= self.leaf_count {
            return Err(Error::Usage(format!(
                "leaf index {index} out of range for {} leaves",
                self.leaf_count
            )));
        }
        let mut pos = index;
        let steps = self.levels[..self.height()]
            .iter()
            .map(|level| {
                let step = if pos % 2 == 0 {
                    ProofStep {
                        sibling: level[pos + 1].clone(),
                        sibling_side: Side::Right,
                    }
                } else {
                    ProofStep {
                        sibling: level[pos - 1].clone(),
                        sibling_side: Side::Left,
                    }
                };
                pos /= 2;
                step
            })
            .collect();
        Ok(MerkleProof {
            leaf_index: index,
            steps,
        })
    }
}

/// Free-function form of [`MerkleTree::root`].
pub fn root(tree: &MerkleTree) -> &Digest {
    tree.root()
}

/// Free-function form of [`MerkleTree::generate_proof`].
pub fn generate_proof(tree: &MerkleTree, index: usize) -> Result<MerkleProof> {
    tree.generate_proof(index)
}

/// Recomputes the root implied by `data` and `proof`, honoring sibling sides.
pub fn reconstruct_root(
    data: &[u8],
    proof: &MerkleProof,
    spec: &HashSpec,
    mut oracle: Option<&mut OracleState>,
) -> Result<Digest> {
    check_widths(proof.siblings(), spec)?;
    let mut node = hash_bytes(data, spec, oracle.as_deref_mut())?;
    for step in &proof.steps {
        node = match step.sibling_side {
            Side::Right => hash_concat(&node, &step.sibling, spec, oracle.as_deref_mut())?,
            Side::Left => hash_concat(&step.sibling, &node, spec, oracle.as_deref_mut())?,
        };
    }
    Ok(node)
}

/// Hash the data, climb the path, compare with the trusted root.
///
/// A width mismatch between the proof, root, and spec is an error, not a
/// failed verification.
pub fn verify_proof(
    data: &[u8],
    proof: &MerkleProof,
    expected_root: &Digest,
    spec: &HashSpec,
) -> Result<bool> {
    check_widths(std::iter::once(expected_root), spec)?;
    Ok(reconstruct_root(data, proof, spec, None)? == *expected_root)
}

/// Parent-first fold `N_j = H(N_{j-1} ‖ s_j)` starting from `leaf_digest`.
///
/// This ignores sibling sides; it is the path shape the falsification model
/// and the simulator work with.
pub fn fold_path(
    leaf_digest: &Digest,
    siblings: &[Digest],
    spec: &HashSpec,
    mut oracle: Option<&mut OracleState>,
) -> Result<Digest> {
    check_widths(std::iter::once(leaf_digest).chain(siblings), spec)?;
    let mut node = leaf_digest.clone();
    for s in siblings {
        node = hash_concat(&node, s, spec, oracle.as_deref_mut())?;
    }
    Ok(node)
}

fn check_widths<'a>(digests: impl IntoIterator<Item = &'a Digest>, spec: &HashSpec) -> Result<()> {
    for d in digests {
        if d.bit_length() != spec.bits() {
            return Err(Error::Usage(format!(
                "digest has {} bits but the hash produces {}",
                d.bit_length(),
                spec.bits()
            )));
        }
    }
    Ok(())
}
