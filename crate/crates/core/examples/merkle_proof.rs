//! Build a tree, export an inclusion proof as JSON, read it back and verify,
//! then show how a substituted block slips through once digests are short.
//!
//! cargo run --example merkle_proof

use merkle_falsify::{build_tree, verify_proof, HashSpec, MerkleProof};

fn main() -> merkle_falsify::Result<()> {
    let blocks = ["alpha", "bravo", "charlie", "delta", "echo"];
    let spec = HashSpec::sha256(256)?;
    let tree = build_tree(&blocks, spec)?;
    println!("root   {}", tree.root());
    println!("height {}", tree.height());

    let json = tree.generate_proof(2)?.to_json(spec.bits())?;
    println!("{json}");
    let (proof, bits) = MerkleProof::from_json(&json)?;
    let spec = HashSpec::sha256(bits)?;
    println!("charlie  -> {}", verify_proof(b"charlie", &proof, tree.root(), &spec)?);
    println!("charlie! -> {}", verify_proof(b"charlie!", &proof, tree.root(), &spec)?);

    // With 8-bit digests a random replacement for "charlie" fools the verifier
    // after a few hundred tries.
    let short = HashSpec::sha256(8)?;
    let tree = build_tree(&blocks, short)?;
    let proof = tree.generate_proof(2)?;
    let forged = (0u32..)
        .map(|i| format!("forged-{i}"))
        .find(|d| verify_proof(d.as_bytes(), &proof, tree.root(), &short).unwrap_or(false))
        .expect("some replacement collides");
    println!("8-bit root {} also accepts {forged:?}", tree.root());
    Ok(())
}
