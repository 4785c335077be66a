//! Parsing of raw interaction and tag-assignment files and construction of
//! per-domain matrices plus the cross-domain common-tag vocabulary.
//!
//! File formats are plain UTF-8 TSV: `user<TAB>item<TAB>value` for
//! interactions and `user<TAB>item<TAB>tag` for tag assignments. A single
//! header line is auto-detected and lines starting with `#` are skipped.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::SparseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct RawInteraction {
    pub user_id: String,
    pub item_id: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTagAssignment {
    pub user_id: String,
    pub item_id: String,
    /// Trimmed and lowercased.
    pub tag: String,
}

/// The ordered set of tags common to all domains of an experiment, with a
/// dense tag -> column index map.
#[derive(Debug, Clone)]
pub struct TagVocabulary {
    tags: Vec<String>,
    index: HashMap<String, usize>,
}

impl TagVocabulary {
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn index_of(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackKind {
    ExplicitRating,
    ImplicitCount,
}

/// One recommender domain, fully indexed and normalized: the preference
/// matrix R (users x items), the user-tag matrix F_U (users x L) and the
/// item-tag matrix F_V (items x L), all with entries in (0, 1].
#[derive(Debug, Clone)]
pub struct DomainDataset {
    pub name: String,
    pub r: SparseMatrix,
    pub f_u: SparseMatrix,
    pub f_v: SparseMatrix,
    pub user_ids: IdMap,
    pub item_ids: IdMap,
    /// Maximum raw preference value; multiplies predictions back onto the
    /// original scale.
    pub max_preference: f64,
    pub feedback_kind: FeedbackKind,
}

impl DomainDataset {
    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }
}

/// Dense external-id <-> index map with deterministic (lexicographic)
/// index assignment.
#[derive(Debug, Clone, Default)]
pub struct IdMap {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    fn from_sorted_set(set: BTreeSet<String>) -> Self {
        let ids: Vec<String> = set.into_iter().collect();
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Self { ids, index }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id_of(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

fn normalize_tag(raw: &str) -> String {
    raw.trim().to_lowercase()
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn is_header(fields: &[&str]) -> bool {
    // A header line is one whose third column is not a number.
    fields.len() >= 3 && fields[2].trim().parse::<f64>().is_err()
}

/// Parses a `user<TAB>item<TAB>value` interaction file. Malformed lines are
/// reported with their line numbers.
pub fn parse_interactions(path: &Path) -> Result<Vec<RawInteraction>> {
    let mut out = Vec::new();
    for (lineno, line) in read_lines(path)?.iter().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        if lineno == 0 && is_header(&fields) {
            continue;
        }
        let value: f64 = fields[2].trim().parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message: format!("invalid value {:?}", fields[2]),
        })?;
        if value < 0.0 || !value.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("negative value {}", value),
            });
        }
        out.push(RawInteraction {
            user_id: fields[0].trim().to_string(),
            item_id: fields[1].trim().to_string(),
            value,
        });
    }
    Ok(out)
}

/// Parses a `user<TAB>item<TAB>tag` tag-assignment file. Tags are trimmed
/// and lowercased; assignments whose tag normalizes to the empty string are
/// rejected.
pub fn parse_tag_assignments(path: &Path) -> Result<Vec<RawTagAssignment>> {
    let mut out = Vec::new();
    for (lineno, line) in read_lines(path)?.iter().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        if lineno == 0 && fields[0].trim().eq_ignore_ascii_case("user") {
            continue;
        }
        let tag = normalize_tag(fields[2]);
        if tag.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: "empty tag after normalization".into(),
            });
        }
        out.push(RawTagAssignment {
            user_id: fields[0].trim().to_string(),
            item_id: fields[1].trim().to_string(),
            tag,
        });
    }
    Ok(out)
}

/// Intersects the per-domain tag sets into the shared vocabulary, ordered
/// lexicographically. Tags are matched after trim + lowercase only; no
/// stemming.
pub fn build_tag_vocabulary(per_domain: &[Vec<RawTagAssignment>]) -> Result<TagVocabulary> {
    let mut sets = per_domain.iter().map(|assignments| {
        assignments
            .iter()
            .map(|a| a.tag.clone())
            .collect::<BTreeSet<String>>()
    });
    let mut common = sets.next().ok_or(Error::NoCommonTags)?;
    for set in sets {
        common = common.intersection(&set).cloned().collect();
    }
    if common.is_empty() {
        return Err(Error::NoCommonTags);
    }
    let tags: Vec<String> = common.into_iter().collect();
    let index = tags
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(TagVocabulary { tags, index })
}

/// Builds one domain's matrices: R from interactions (duplicates resolved
/// last-wins), F_U and F_V from tag-use counts restricted to the shared
/// vocabulary, all normalized by their own maxima. Users and items that
/// appear only in tag data are still registered.
pub fn build_domain(
    name: &str,
    interactions: &[RawInteraction],
    assignments: &[RawTagAssignment],
    vocab: &TagVocabulary,
    feedback_kind: FeedbackKind,
) -> Result<DomainDataset> {
    if vocab.is_empty() {
        return Err(Error::NoCommonTags);
    }
    let mut users = BTreeSet::new();
    let mut items = BTreeSet::new();
    for it in interactions {
        users.insert(it.user_id.clone());
        items.insert(it.item_id.clone());
    }
    for a in assignments {
        users.insert(a.user_id.clone());
        items.insert(a.item_id.clone());
    }
    let user_ids = IdMap::from_sorted_set(users);
    let item_ids = IdMap::from_sorted_set(items);

    // Last occurrence wins for duplicate (user, item) interactions.
    let mut prefs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for it in interactions {
        let u = user_ids.index_of(&it.user_id).unwrap();
        let i = item_ids.index_of(&it.item_id).unwrap();
        prefs.insert((u, i), it.value);
    }

    let mut user_tag: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut item_tag: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for a in assignments {
        let Some(l) = vocab.index_of(&a.tag) else {
            continue;
        };
        let u = user_ids.index_of(&a.user_id).unwrap();
        let i = item_ids.index_of(&a.item_id).unwrap();
        *user_tag.entry((u, l)).or_insert(0.0) += 1.0;
        *item_tag.entry((i, l)).or_insert(0.0) += 1.0;
    }

    let raw_r = SparseMatrix::from_triplets(
        user_ids.len(),
        item_ids.len(),
        prefs.iter().map(|(&(u, i), &v)| (u, i, v)),
    )?;
    let (r, max_preference) = raw_r.normalize_by_max()?;

    let normalize_counts = |counts: &BTreeMap<(usize, usize), f64>, n_rows: usize| -> Result<SparseMatrix> {
        let m = SparseMatrix::from_triplets(
            n_rows,
            vocab.len(),
            counts.iter().map(|(&(r0, l), &v)| (r0, l, v)),
        )?;
        if m.is_empty() {
            return Ok(m);
        }
        Ok(m.normalize_by_max()?.0)
    };
    let f_u = normalize_counts(&user_tag, user_ids.len())?;
    let f_v = normalize_counts(&item_tag, item_ids.len())?;

    Ok(DomainDataset {
        name: name.to_string(),
        r,
        f_u,
        f_v,
        user_ids,
        item_ids,
        max_preference,
        feedback_kind,
    })
}
