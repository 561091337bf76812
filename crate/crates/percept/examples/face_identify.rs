//! Enroll two people from mock embeddings, persist the registry, and
//! identify probes against it.
//!
//! ```bash
//! cargo run --example face_identify
//! ```

use percept::face::{Registry, RegistryConfig};
use percept::mock::seeded_probe;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = RegistryConfig::new(("facenet", 128), ("vggface", 256));
    let mut registry = Registry::new(config.clone());

    // The seeded mock turns any key into a stable unit vector per backend,
    // standing in for real embedding networks.
    registry.enroll("alice", &seeded_probe(&config, "alice-sample-1").embeddings, 0)?;
    registry.enroll("alice", &seeded_probe(&config, "alice-sample-2").embeddings, 1)?;
    registry.enroll("bob", &seeded_probe(&config, "bob-sample-1").embeddings, 2)?;
    println!("enrolled {} people", registry.len());

    let path = std::env::temp_dir().join("percept_people.reg");
    registry.save(&path)?;
    let registry = Registry::load(&path, config.clone())?;
    println!("registry persisted to {}", path.display());

    for key in ["alice-sample-2", "bob-sample-1", "stranger-7"] {
        let probe = seeded_probe(&config, key);
        let result = registry.identify(&probe, 0.5)?;
        match &result.person_id {
            Some(person) => println!(
                "probe {key:>16}: {person} (fused {:.3}, per-backend {:?})",
                result.fused_score,
                result
                    .per_backend_scores
                    .values()
                    .map(|s| format!("{s:.3}"))
                    .collect::<Vec<_>>()
            ),
            None => println!(
                "probe {key:>16}: no match (best fused {:.3})",
                result.fused_score
            ),
        }
    }
    Ok(())
}
