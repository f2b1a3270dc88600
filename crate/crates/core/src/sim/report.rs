//! The feature report: each row of the qualitative comparison is backed by
//! an executed test over this run's artifacts, with pointers to the traces
//! that produced the verdicts.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::crypto::{derive_private_key, CurveParams};
use crate::phy::{bits_to_bytes, sic_decode_strong};
use crate::protocol::{AdversaryKind, AttackReport, SecureSession, SessionTrace, UeOutcome};

use super::{Scheme, SimError};

/// A file backing a verdict, pinned by content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRef {
    pub path: String,
    pub sha256: String,
}

impl EvidenceRef {
    pub fn for_content(path: &str, content: &[u8]) -> Self {
        EvidenceRef {
            path: path.to_string(),
            sha256: hex::encode(Sha256::digest(content)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub feature: String,
    pub pass: bool,
    pub test_id: String,
    pub detail: String,
    pub evidence: Vec<EvidenceRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub scheme: Scheme,
    pub rows: Vec<FeatureRow>,
}

/// Everything a report is built from.
pub struct ReportResults<'a> {
    pub scheme: Scheme,
    pub secure: Option<&'a SecureSession>,
    pub legacy_trace: Option<&'a SessionTrace>,
    pub attacks: Option<&'a AttackReport>,
    /// Trace files written for this run, referenced from every row.
    pub evidence: Vec<EvidenceRef>,
}

impl FeatureReport {
    pub fn build(results: &ReportResults) -> Result<FeatureReport, SimError> {
        match results.scheme {
            Scheme::Secure => build_secure(results),
            Scheme::Legacy => build_legacy(results),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, feature: &str) -> Option<&FeatureRow> {
        self.rows.iter().find(|r| r.feature == feature)
    }

    /// Re-hashes every referenced evidence file; a deleted or modified
    /// trace invalidates the report.
    pub fn self_check(&self, base_dir: &Path) -> Result<(), SimError> {
        for row in &self.rows {
            for ev in &row.evidence {
                let path = base_dir.join(&ev.path);
                let content = std::fs::read(&path).map_err(|_| {
                    SimError::MissingResults(format!(
                        "evidence file {} referenced by row {:?} is missing",
                        path.display(),
                        row.feature
                    ))
                })?;
                let digest = hex::encode(Sha256::digest(&content));
                if digest != ev.sha256 {
                    return Err(SimError::MissingResults(format!(
                        "evidence file {} no longer matches its recorded hash",
                        path.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "feature report ({:?} scheme)", self.scheme).unwrap();
        for row in &self.rows {
            writeln!(
                out,
                "  [{}] {:<35} {} ({})",
                if row.pass { "pass" } else { "fail" },
                row.feature,
                row.detail,
                row.test_id
            )
            .unwrap();
        }
        out
    }
}

fn build_secure(results: &ReportResults) -> Result<FeatureReport, SimError> {
    let session = results
        .secure
        .ok_or_else(|| SimError::MissingResults("no secure scenario has run".into()))?;
    let attacks = results
        .attacks
        .ok_or_else(|| SimError::MissingResults("the attack suite has not run".into()))?;
    let ev = results.evidence.clone();

    let mut rows = Vec::with_capacity(5);

    // user privacy: the ledger stores only (ue_id, public key, timestamp);
    // no identity bytes may appear in the chain
    let ledger_bytes = session.ledger.to_file_string().into_bytes();
    let mut leaked = Vec::new();
    for (ue_id, identity) in &session.identities {
        if contains(&ledger_bytes, identity.imei.as_bytes()) {
            leaked.push(format!("{ue_id} imei"));
        }
        if contains(&ledger_bytes, &identity.mac) {
            leaked.push(format!("{ue_id} mac"));
        }
    }
    rows.push(FeatureRow {
        feature: "user_privacy".into(),
        pass: leaked.is_empty(),
        test_id: "ledger_contains_no_identity_bytes".into(),
        detail: if leaked.is_empty() {
            "registry stores only ue_id and public key".into()
        } else {
            format!("identity material leaked into the ledger: {leaked:?}")
        },
        evidence: ev.clone(),
    });

    // encryption: both UEs recovered, and neither plaintext appears in the
    // eavesdropper's view of the air interface
    let recovered = session.payloads.iter().all(|(ue_id, payload)| {
        session.trace.outcomes.iter().any(
            |(id, o)| id == ue_id && matches!(o, UeOutcome::Recovered { payload: p } if p == payload),
        )
    });
    let noiseless = crate::phy::ChannelRealization {
        noise_sigma: 0.0,
        ..session.channel
    };
    let alloc = crate::phy::allocate_power(
        session.frame.control.power_total,
        session.frame.control.weak_fraction,
    )?;
    let (weak_bits, strong_bits) =
        sic_decode_strong(&session.frame.signal.symbols, &alloc, &noiseless, None);
    let on_air = [bits_to_bytes(&weak_bits), bits_to_bytes(&strong_bits)];
    let exposed = session.payloads.iter().any(|(_, payload)| {
        !payload.is_empty() && on_air.iter().any(|layer| contains(layer, payload))
    });
    rows.push(FeatureRow {
        feature: "encryption".into(),
        pass: recovered && !exposed,
        test_id: "two_phase_roundtrip_and_air_interface_opacity".into(),
        detail: format!(
            "asymmetric layer to each user's public key, symmetric layer under PR_B; \
             payloads recovered: {recovered}, plaintext visible on air: {exposed}"
        ),
        evidence: ev.clone(),
    });

    // key generation: inputs actually hashed vs the baseline's
    let curve = CurveParams::secp256k1();
    let mut perturbation_holds = true;
    for (_, identity) in &session.identities {
        let base = derive_private_key(identity, &curve)?.to_bytes();
        let mut t = identity.clone();
        t.timestamp_ms += 1;
        let mut lat = identity.clone();
        lat.lat_udeg -= 1;
        let mut lon = identity.clone();
        lon.lon_udeg += 1;
        for variant in [t, lat, lon] {
            if derive_private_key(&variant, &curve)?.to_bytes() == base {
                perturbation_holds = false;
            }
        }
    }
    rows.push(FeatureRow {
        feature: "key_generation".into(),
        pass: perturbation_holds,
        test_id: "derivation_inputs_perturbation".into(),
        detail: "inputs hashed: imei, mac, timestamp, spatial (lat/lon); baseline uses imei, mac only"
            .into(),
        evidence: ev.clone(),
    });

    // spoofing protection: from the executed adversary suite
    let spoof = attacks
        .outcomes
        .iter()
        .find(|o| o.kind == AdversaryKind::SpoofingClone)
        .ok_or_else(|| SimError::MissingResults("spoofing_clone attack never ran".into()))?;
    rows.push(FeatureRow {
        feature: "spoofing_protection".into(),
        pass: spoof.blocked,
        test_id: "attack_suite::spoofing_clone".into(),
        detail: match &spoof.residual_note {
            Some(note) => format!("{}; residual assumption: {note}", spoof.detail),
            None => spoof.detail.clone(),
        },
        evidence: ev.clone(),
    });

    // data hijacking protection: outsider and cross-user attacks
    let mut hijack_pass = true;
    let mut hijack_detail = Vec::new();
    for kind in [AdversaryKind::Eavesdropper, AdversaryKind::CrossUserReader] {
        let outcome = attacks
            .outcomes
            .iter()
            .find(|o| o.kind == kind)
            .ok_or_else(|| SimError::MissingResults(format!("{kind:?} attack never ran")))?;
        hijack_pass &= outcome.blocked;
        hijack_detail.push(format!("{kind:?}: {}", if outcome.blocked { "blocked" } else { "succeeded" }));
    }
    rows.push(FeatureRow {
        feature: "data_hijacking_protection".into(),
        pass: hijack_pass,
        test_id: "attack_suite::eavesdropper+cross_user_reader".into(),
        detail: hijack_detail.join("; "),
        evidence: ev,
    });

    Ok(FeatureReport {
        scheme: Scheme::Secure,
        rows,
    })
}

fn build_legacy(results: &ReportResults) -> Result<FeatureReport, SimError> {
    let trace = results
        .legacy_trace
        .ok_or_else(|| SimError::MissingResults("no legacy scenario has run".into()))?;
    let ev = results.evidence.clone();
    let exposed = trace.ue1_observed_weak_payload.is_some();
    let rows = vec![
        FeatureRow {
            feature: "user_privacy".into(),
            pass: false,
            test_id: "legacy_flow_inspection".into(),
            detail: "no identity registry; requests carry identity in the clear".into(),
            evidence: ev.clone(),
        },
        FeatureRow {
            feature: "encryption".into(),
            pass: false,
            test_id: "legacy_air_interface".into(),
            detail: if exposed {
                "no encryption: the strong user observed the weak user's plaintext during SIC".into()
            } else {
                "no encryption layer present".into()
            },
            evidence: ev.clone(),
        },
        FeatureRow {
            feature: "key_generation".into(),
            pass: false,
            test_id: "legacy_flow_inspection".into(),
            detail: "no keys are generated".into(),
            evidence: ev.clone(),
        },
        FeatureRow {
            feature: "spoofing_protection".into(),
            pass: false,
            test_id: "legacy_flow_inspection".into(),
            detail: "no registration step to protect".into(),
            evidence: ev.clone(),
        },
        FeatureRow {
            feature: "data_hijacking_protection".into(),
            pass: false,
            test_id: "legacy_air_interface".into(),
            detail: "plaintext superposition is readable by any receiver".into(),
            evidence: ev,
        },
    ];
    Ok(FeatureReport {
        scheme: Scheme::Legacy,
        rows,
    })
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}
