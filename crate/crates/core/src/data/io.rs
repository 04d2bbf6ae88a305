use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{DatasetSplit, Interactions, Protocol, SplitManifest};
use crate::error::{Error, Result};

/// Explicit ratings in the Coat layout: `num_users` rows of `num_items`
/// integers, 0 meaning unrated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseRatings {
    pub num_users: usize,
    pub num_items: usize,
    pub values: Vec<u8>,
}

impl DenseRatings {
    pub fn get(&self, u: usize, i: usize) -> u8 {
        self.values[u * self.num_items + i]
    }

    pub fn row(&self, u: usize) -> &[u8] {
        &self.values[u * self.num_items..(u + 1) * self.num_items]
    }

    /// Sparse view keeping only rated cells.
    pub fn to_explicit(&self) -> ExplicitRatings {
        let mut entries = Vec::new();
        for u in 0..self.num_users {
            for (i, &v) in self.row(u).iter().enumerate() {
                if v != 0 {
                    entries.push(Rating {
                        user: u as u32,
                        item: i as u32,
                        value: v as f64,
                    });
                }
            }
        }
        ExplicitRatings {
            num_users: self.num_users,
            num_items: self.num_items,
            entries,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub value: f64,
}

/// Rated cells over a dense index space.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitRatings {
    pub num_users: usize,
    pub num_items: usize,
    pub entries: Vec<Rating>,
}

/// A raw `user<sep>item<sep>rating` record with external ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingTriplet {
    pub user: u64,
    pub item: u64,
    pub rating: f64,
}

/// External ids in ascending order; the position is the dense index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdMap {
    pub users: Vec<u64>,
    pub items: Vec<u64>,
}

pub fn parse_dense_ascii(
    text: &str,
    num_users: usize,
    num_items: usize,
    origin: &str,
) -> Result<DenseRatings> {
    let mut values = Vec::with_capacity(num_users * num_items);
    let mut rows = 0;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if rows == num_users {
            return Err(Error::parse(
                origin,
                line_no,
                format!("more than {num_users} rows"),
            ));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: u8 = tok.parse().map_err(|_| {
                Error::parse(origin, line_no, format!("`{tok}` is not an integer rating"))
            })?;
            if v > 5 {
                log::warn!("{origin}:{line_no}: rating {v} outside 0..=5");
            }
            values.push(v);
        }
        let got = values.len() - before;
        if got != num_items {
            return Err(Error::parse(
                origin,
                line_no,
                format!("expected {num_items} columns, found {got}"),
            ));
        }
        rows += 1;
    }
    if rows != num_users {
        return Err(Error::parse(
            origin,
            rows + 1,
            format!("expected {num_users} rows, found {rows}"),
        ));
    }
    Ok(DenseRatings {
        num_users,
        num_items,
        values,
    })
}

pub fn load_dense_ascii(path: &Path, num_users: usize, num_items: usize) -> Result<DenseRatings> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dense_ascii(&text, num_users, num_items, &path.display().to_string())
}

/// Parses `user<sep>item<sep>rating[<sep>ignored...]` lines. `sep` may be
/// multi-character (`::` for MovieLens 1M/10M).
pub fn parse_triplets(text: &str, sep: &str, origin: &str) -> Result<Vec<RatingTriplet>> {
    if sep.is_empty() {
        return Err(Error::Config("empty separator".into()));
    }
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(sep).map(str::trim);
        let mut field = |name: &str| {
            cols.next()
                .filter(|c| !c.is_empty())
                .ok_or_else(|| Error::parse(origin, line_no, format!("missing {name} column")))
        };
        let (u, i, r) = (field("user")?, field("item")?, field("rating")?);
        let user = u
            .parse()
            .map_err(|_| Error::parse(origin, line_no, format!("user id `{u}` is not numeric")))?;
        let item = i
            .parse()
            .map_err(|_| Error::parse(origin, line_no, format!("item id `{i}` is not numeric")))?;
        let rating: f64 = r
            .parse()
            .map_err(|_| Error::parse(origin, line_no, format!("rating `{r}` is not numeric")))?;
        if !rating.is_finite() {
            return Err(Error::parse(origin, line_no, "rating is not finite"));
        }
        out.push(RatingTriplet { user, item, rating });
    }
    if out.is_empty() {
        return Err(Error::parse(origin, 0, "no records"));
    }
    Ok(out)
}

pub fn load_triplets(path: &Path, sep: &str) -> Result<Vec<RatingTriplet>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_triplets(&text, sep, &path.display().to_string())
}

/// Maps external ids to dense indices, ascending id order. A repeated
/// (user, item) keeps its last rating.
pub fn compact_ids(triplets: &[RatingTriplet]) -> (ExplicitRatings, IdMap) {
    let mut users: Vec<u64> = triplets.iter().map(|t| t.user).collect();
    let mut items: Vec<u64> = triplets.iter().map(|t| t.item).collect();
    users.sort_unstable();
    users.dedup();
    items.sort_unstable();
    items.dedup();
    let index = |ids: &[u64], id: u64| ids.binary_search(&id).expect("id collected above") as u32;

    let mut cells: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for t in triplets {
        cells.insert((index(&users, t.user), index(&items, t.item)), t.rating);
    }
    let entries = cells
        .into_iter()
        .map(|((user, item), value)| Rating { user, item, value })
        .collect();
    let ratings = ExplicitRatings {
        num_users: users.len(),
        num_items: items.len(),
        entries,
    };
    (ratings, IdMap { users, items })
}

/// Writes positives as `user\titem\t1` lines, which reload through
/// [`load_triplets`].
pub fn write_interactions(path: &Path, inter: &Interactions) -> Result<()> {
    let mut buf = String::with_capacity(inter.nnz() * 12);
    for (u, i) in inter.pairs() {
        buf.push_str(&format!("{u}\t{i}\t1\n"));
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads `user\titem\trating` lines over a known shape; only positive ratings
/// are kept.
pub fn read_interactions(path: &Path, num_users: usize, num_items: usize) -> Result<Interactions> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Ok(Interactions::empty(num_users, num_items));
    }
    let triplets = parse_triplets(&text, "\t", &path.display().to_string())?;
    Interactions::from_pairs(
        num_users,
        num_items,
        triplets
            .iter()
            .filter(|t| t.rating > 0.0)
            .map(|t| (t.user as u32, t.item as u32)),
    )
}

const TRAIN_FILE: &str = "train.tsv";
const VALIDATION_FILE: &str = "validation.tsv";
const TEST_FILE: &str = "test.tsv";
const CANDIDATES_FILE: &str = "test_candidates.tsv";
pub(crate) const MANIFEST_FILE: &str = "split.manifest";

/// Writes a split directory: positives per part, the split manifest, and
/// (MAR protocol only) the explicit candidate lists with their labels.
pub fn write_split(dir: &Path, split: &DatasetSplit, manifest: &SplitManifest) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_interactions(&dir.join(TRAIN_FILE), &split.train)?;
    write_interactions(&dir.join(VALIDATION_FILE), &split.validation)?;
    write_interactions(&dir.join(TEST_FILE), &split.test)?;
    if split.protocol == Protocol::MarTest {
        let path = dir.join(CANDIDATES_FILE);
        let mut buf = String::new();
        for (u, cands) in split.all_test_candidates().iter().enumerate() {
            for &i in cands {
                let label = u8::from(split.test.contains(u, i));
                buf.push_str(&format!("{u}\t{i}\t{label}\n"));
            }
        }
        fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join(MANIFEST_FILE);
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(manifest.to_text().as_bytes())
        .map_err(|e| Error::io(&path, e))
}

/// Reads a directory written by [`write_split`].
pub fn read_split(dir: &Path) -> Result<(DatasetSplit, SplitManifest)> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest = SplitManifest::parse(&text, &mpath.display().to_string())?;
    let m: usize = manifest.get_parsed("num_users")?;
    let n: usize = manifest.get_parsed("num_items")?;
    let protocol = Protocol::parse(manifest.get("protocol")?)?;
    let train = read_interactions(&dir.join(TRAIN_FILE), m, n)?;
    let validation = read_interactions(&dir.join(VALIDATION_FILE), m, n)?;
    let test = read_interactions(&dir.join(TEST_FILE), m, n)?;
    let candidates = match protocol {
        Protocol::MnarTest => DatasetSplit::mnar_candidates(&train, &validation),
        Protocol::MarTest => {
            let path = dir.join(CANDIDATES_FILE);
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let mut rows = vec![Vec::new(); m];
            if !text.trim().is_empty() {
                for t in parse_triplets(&text, "\t", &path.display().to_string())? {
                    let u = t.user as usize;
                    if u >= m || t.item as usize >= n {
                        return Err(Error::Data(format!(
                            "candidate ({}, {}) outside {m}x{n}",
                            t.user, t.item
                        )));
                    }
                    rows[u].push(t.item as u32);
                }
            }
            rows
        }
    };
    Ok((
        DatasetSplit::new(train, validation, test, protocol, candidates)?,
        manifest,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_ascii_parses_rows() {
        let r = parse_dense_ascii("0 4 1\n5 0 0\n", 2, 3, "mem").unwrap();
        assert_eq!(r.values, vec![0, 4, 1, 5, 0, 0]);
        assert_eq!(r.get(1, 0), 5);
        let ex = r.to_explicit();
        assert_eq!(ex.entries.len(), 3);
    }

    #[test]
    fn dense_ascii_short_line_names_line() {
        let err = parse_dense_ascii("0 4\n5 0 0\n", 2, 3, "mem").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dense_ascii_rejects_non_integer_and_wrong_row_count() {
        assert!(matches!(
            parse_dense_ascii("0 x 1\n", 1, 3, "mem"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_dense_ascii("0 0 1\n", 2, 3, "mem").is_err());
        assert!(parse_dense_ascii("0 0 1\n1 1 1\n1 1 1\n", 2, 3, "mem").is_err());
    }

    #[test]
    fn triplets_tab_and_multichar_separator() {
        let t = parse_triplets("1\t7\t5\n", "\t", "mem").unwrap();
        assert_eq!(
            t,
            vec![RatingTriplet {
                user: 1,
                item: 7,
                rating: 5.0
            }]
        );
        let t = parse_triplets("3::12::4::964982703\r\n", "::", "mem").unwrap();
        assert_eq!((t[0].user, t[0].item, t[0].rating), (3, 12, 4.0));
    }

    #[test]
    fn triplets_reject_non_numeric_and_empty() {
        assert!(matches!(
            parse_triplets("a,b,c", ",", "mem"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_triplets("1,2,x", ",", "mem").is_err());
        assert!(parse_triplets("", ",", "mem").is_err());
        assert!(parse_triplets("\n\n", ",", "mem").is_err());
    }

    #[test]
    fn compaction_sorts_external_ids() {
        let t = parse_triplets("50 9 4\n10 3 5\n50 3 1\n", " ", "mem").unwrap();
        let (r, ids) = compact_ids(&t);
        assert_eq!(ids.users, vec![10, 50]);
        assert_eq!(ids.items, vec![3, 9]);
        assert_eq!(r.entries[0], Rating { user: 0, item: 0, value: 5.0 });
        assert_eq!(r.entries.len(), 3);
    }
}
