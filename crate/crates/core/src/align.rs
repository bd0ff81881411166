//! Entity alignment: salted-hash private set intersection over sample IDs.
//!
//! Participants exchange SHA-256 digests of `salt || id` instead of raw
//! IDs, then keep only the rows whose digests appear everywhere. The
//! intersection is ordered by digest bytes, which gives every participant
//! the same canonical row order without revealing anything beyond the
//! common IDs. Naive salted hashing is the only protocol implemented; the
//! digest-set file format below is the seam where a stronger exchange
//! could be swapped in.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DIGEST_WIDTH: usize = 32;

/// One participant's hashed ID set. The digest-to-row map never leaves the
/// owner; only digests are exchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashedIdSet {
    pub owner: String,
    salt: Vec<u8>,
    rows: BTreeMap<[u8; DIGEST_WIDTH], usize>,
}

/// Per-participant row indices, one list per input set, all the same
/// length: position `p` of every list points at the same underlying ID.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedIndex {
    pub rows: Vec<Vec<usize>>,
}

impl AlignedIndex {
    pub fn len(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn digest_of(salt: &[u8], id: &str) -> [u8; DIGEST_WIDTH] {
    let mut hasher = Sha256::new();
    hasher.update(salt);
    hasher.update(id.as_bytes());
    hasher.finalize().into()
}

/// Hashes every local ID under the shared salt. IDs must be unique.
pub fn hash_ids(owner: &str, ids: &[String], salt: &[u8]) -> Result<HashedIdSet> {
    if ids.is_empty() {
        return Err(Error::EmptyInput(format!("{owner}: no ids to hash")));
    }
    let mut rows = BTreeMap::new();
    for (index, id) in ids.iter().enumerate() {
        if rows.insert(digest_of(salt, id), index).is_some() {
            return Err(Error::DuplicateId(format!(
                "{owner}: id {id:?} appears more than once"
            )));
        }
    }
    Ok(HashedIdSet {
        owner: owner.to_owned(),
        salt: salt.to_owned(),
        rows,
    })
}

impl HashedIdSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Digests in canonical (byte-lexicographic) order.
    pub fn sorted_digests(&self) -> Vec<[u8; DIGEST_WIDTH]> {
        self.rows.keys().copied().collect()
    }
}

/// Intersects the sets and returns each participant's row indices in
/// canonical digest order. Sets hashed under different salts cannot be
/// compared and are rejected.
pub fn intersect(sets: &[HashedIdSet]) -> Result<AlignedIndex> {
    let Some(first) = sets.first() else {
        return Err(Error::EmptyInput("no id sets to intersect".into()));
    };
    for set in &sets[1..] {
        if set.salt != first.salt {
            return Err(Error::Protocol(format!(
                "{} and {} hashed ids under different salts",
                first.owner, set.owner
            )));
        }
    }
    let mut rows = vec![Vec::new(); sets.len()];
    'digests: for (digest, &first_row) in &first.rows {
        let mut positions = Vec::with_capacity(sets.len());
        positions.push(first_row);
        for set in &sets[1..] {
            match set.rows.get(digest) {
                Some(&row) => positions.push(row),
                None => continue 'digests,
            }
        }
        for (list, row) in rows.iter_mut().zip(positions) {
            list.push(row);
        }
    }
    Ok(AlignedIndex { rows })
}

/// Writes a digest set as `count: u32 LE` followed by the digests in
/// canonical order, 32 bytes each.
pub fn write_digest_file(path: &Path, set: &HashedIdSet) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(&(set.len() as u32).to_le_bytes())?;
    for digest in set.rows.keys() {
        out.write_all(digest)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a digest-set file back into canonical order, validating the count
/// header against the actual payload.
pub fn read_digest_file(path: &Path) -> Result<Vec<[u8; DIGEST_WIDTH]>> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut count_bytes = [0u8; 4];
    file.read_exact(&mut count_bytes)
        .map_err(|_| Error::Corrupt("digest file shorter than its header".into()))?;
    let count = u32::from_le_bytes(count_bytes) as usize;
    let mut digests = Vec::with_capacity(count);
    for i in 0..count {
        let mut digest = [0u8; DIGEST_WIDTH];
        file.read_exact(&mut digest)
            .map_err(|_| Error::Corrupt(format!("digest file ends inside entry {i} of {count}")))?;
        digests.push(digest);
    }
    let mut rest = [0u8; 1];
    if file.read(&mut rest)? != 0 {
        return Err(Error::Corrupt("digest file has trailing bytes".into()));
    }
    Ok(digests)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn same_ids_same_salt_give_identical_digests() {
        let a = hash_ids("a", &ids(&["x", "y", "z"]), b"salt").unwrap();
        let b = hash_ids("b", &ids(&["z", "x", "y"]), b"salt").unwrap();
        assert_eq!(a.sorted_digests(), b.sorted_digests());
    }

    #[test]
    fn different_salts_differ_and_cannot_intersect() {
        let a = hash_ids("a", &ids(&["x"]), b"salt1").unwrap();
        let b = hash_ids("b", &ids(&["x"]), b"salt2").unwrap();
        assert_ne!(a.sorted_digests(), b.sorted_digests());
        assert!(matches!(intersect(&[a, b]), Err(Error::Protocol(_))));
    }

    #[test]
    fn thousand_ids_thousand_distinct_digests() {
        let many: Vec<String> = (0..1000).map(|i| format!("user-{i}")).collect();
        let set = hash_ids("a", &many, b"s").unwrap();
        assert_eq!(set.len(), 1000);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = hash_ids("a", &ids(&["x", "y", "x"]), b"s").unwrap_err();
        assert!(matches!(err, Error::DuplicateId(_)));
    }

    #[test]
    fn three_way_intersection_matches_hand_result() {
        let salt = b"shared";
        let a = hash_ids("a", &ids(&["a", "b", "c"]), salt).unwrap();
        let b = hash_ids("b", &ids(&["b", "c", "d"]), salt).unwrap();
        let c = hash_ids("c", &ids(&["c", "b", "e"]), salt).unwrap();
        let aligned = intersect(&[a, b, c]).unwrap();
        assert_eq!(aligned.len(), 2);
        // Every participant's index at position p names the same ID.
        let names = [
            ids(&["a", "b", "c"]),
            ids(&["b", "c", "d"]),
            ids(&["c", "b", "e"]),
        ];
        for p in 0..aligned.len() {
            let resolved: Vec<&str> = (0..3)
                .map(|k| names[k][aligned.rows[k][p]].as_str())
                .collect();
            assert!(resolved.iter().all(|&n| n == resolved[0]));
            assert!(["b", "c"].contains(&resolved[0]));
        }
    }

    #[test]
    fn identical_sets_intersect_fully_disjoint_sets_emptily() {
        let salt = b"s";
        let a = hash_ids("a", &ids(&["p", "q"]), salt).unwrap();
        let b = hash_ids("b", &ids(&["q", "p"]), salt).unwrap();
        assert_eq!(intersect(&[a, b]).unwrap().len(), 2);

        let c = hash_ids("c", &ids(&["r"]), salt).unwrap();
        let d = hash_ids("d", &ids(&["s"]), salt).unwrap();
        let empty = intersect(&[c, d]).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.rows.len(), 2);
    }

    #[test]
    fn participant_order_does_not_change_the_id_sequence() {
        let salt = b"s";
        let names_a = ids(&["m", "n", "o", "p"]);
        let names_b = ids(&["p", "o", "x", "m"]);
        let a = hash_ids("a", &names_a, salt).unwrap();
        let b = hash_ids("b", &names_b, salt).unwrap();
        let ab = intersect(&[a.clone(), b.clone()]).unwrap();
        let ba = intersect(&[b, a]).unwrap();
        let seq_ab: Vec<&str> = ab.rows[0].iter().map(|&i| names_a[i].as_str()).collect();
        let seq_ba: Vec<&str> = ba.rows[1].iter().map(|&i| names_a[i].as_str()).collect();
        assert_eq!(seq_ab, seq_ba);
    }

    #[test]
    fn digest_file_round_trips_and_rejects_truncation() {
        let set = hash_ids("a", &ids(&["one", "two", "three"]), b"s").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("digests.bin");
        write_digest_file(&path, &set).unwrap();
        assert_eq!(read_digest_file(&path).unwrap(), set.sorted_digests());

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(read_digest_file(&path), Err(Error::Corrupt(_))));
    }
}
