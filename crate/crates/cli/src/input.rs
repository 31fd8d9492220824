//! Readers for the three input formats. Errors carry 1-based line numbers,
//! counting the header as line 1.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use posetfd::estimators::FeatureMatrix;

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))
}

fn line_of(record: &csv::StringRecord, fallback: usize) -> u64 {
    record.position().map_or(fallback as u64, |p| p.line())
}

fn check_header(rdr: &mut csv::Reader<std::fs::File>, path: &Path, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().with_context(|| format!("{}: line 1", path.display()))?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        bail!(
            "{}: line 1: expected header {:?}, found {:?}",
            path.display(),
            expected.join(","),
            got.join(",")
        );
    }
    Ok(())
}

/// Item names: the given order, or else order of first appearance.
#[derive(Debug, Default)]
pub struct Items {
    names: Vec<String>,
    index: HashMap<String, usize>,
    fixed: bool,
}

impl Items {
    pub fn new(given: Option<&[String]>) -> Result<Self> {
        let mut items = Items::default();
        if let Some(names) = given {
            for n in names {
                if items.index.insert(n.clone(), items.names.len()).is_some() {
                    bail!("item {n:?} listed twice");
                }
                items.names.push(n.clone());
            }
            items.fixed = true;
        }
        Ok(items)
    }

    fn get(&mut self, name: &str) -> Option<usize> {
        if let Some(&i) = self.index.get(name) {
            return Some(i);
        }
        if self.fixed {
            return None;
        }
        self.index.insert(name.to_string(), self.names.len());
        self.names.push(name.to_string());
        Some(self.names.len() - 1)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Game outcomes as `(winner, loser)` item indices.
#[derive(Debug)]
pub struct Comparisons {
    pub items: Vec<String>,
    pub games: Vec<(usize, usize)>,
}

/// Columns `item_i,item_j,winner`; the winner must name one of the two items.
pub fn read_comparisons(path: &Path, items: Option<&[String]>) -> Result<Comparisons> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &["item_i", "item_j", "winner"])?;
    let mut names = Items::new(items)?;
    let mut games = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: record {}", path.display(), r + 1))?;
        let line = line_of(&rec, r + 2);
        let (a, b, w) = (&rec[0], &rec[1], &rec[2]);
        if a == b {
            bail!("{}: line {line}: item {a:?} compared with itself", path.display());
        }
        let unknown = |n: &str| anyhow::anyhow!("{}: line {line}: unknown item {n:?}", path.display());
        let i = names.get(a).ok_or_else(|| unknown(a))?;
        let j = names.get(b).ok_or_else(|| unknown(b))?;
        games.push(if w == a {
            (i, j)
        } else if w == b {
            (j, i)
        } else {
            bail!(
                "{}: line {line}: winner {w:?} is neither {a:?} nor {b:?}",
                path.display()
            );
        });
    }
    Ok(Comparisons {
        items: names.names().to_vec(),
        games,
    })
}

#[derive(Debug)]
pub struct Features {
    pub names: Vec<String>,
    /// `None` when the file has a header but no rows.
    pub data: Option<FeatureMatrix>,
}

/// A header of variable names and one numeric row per observation.
pub fn read_features(path: &Path) -> Result<Features> {
    let mut rdr = reader(path)?;
    let names: Vec<String> = rdr
        .headers()
        .with_context(|| format!("{}: line 1", path.display()))?
        .iter()
        .map(String::from)
        .collect();
    if names.is_empty() || names.iter().any(String::is_empty) {
        bail!("{}: line 1: empty variable name", path.display());
    }
    let mut values = Vec::new();
    let mut n = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: record {}", path.display(), r + 1))?;
        let line = line_of(&rec, r + 2);
        for (field, name) in rec.iter().zip(&names) {
            let x: f64 = field
                .parse()
                .with_context(|| format!("{}: line {line}: {name} = {field:?} is not a number", path.display()))?;
            if !x.is_finite() {
                bail!("{}: line {line}: {name} = {field} is not finite", path.display());
            }
            values.push(x);
        }
        n += 1;
    }
    let data = if n == 0 {
        None
    } else {
        Some(FeatureMatrix::new(n, names.len(), values)?)
    };
    Ok(Features { names, data })
}

#[derive(Debug)]
pub struct Scores {
    pub groups: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

/// Columns `group,value`.
pub fn read_scores(path: &Path, items: Option<&[String]>) -> Result<Scores> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &["group", "value"])?;
    let mut names = Items::new(items)?;
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: record {}", path.display(), r + 1))?;
        let line = line_of(&rec, r + 2);
        let g = names
            .get(&rec[0])
            .ok_or_else(|| anyhow::anyhow!("{}: line {line}: unknown group {:?}", path.display(), &rec[0]))?;
        let x: f64 = rec[1]
            .parse()
            .with_context(|| format!("{}: line {line}: value {:?} is not a number", path.display(), &rec[1]))?;
        if !x.is_finite() {
            bail!("{}: line {line}: value {x} is not finite", path.display());
        }
        if values.len() <= g {
            values.resize(g + 1, Vec::new());
        }
        values[g].push(x);
    }
    values.resize(names.names().len(), Vec::new());
    Ok(Scores {
        groups: names.names().to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn comparisons_use_first_appearance_order() {
        let f = file("item_i,item_j,winner\nb,a,a\nc,a,c\n");
        let c = read_comparisons(f.path(), None).unwrap();
        assert_eq!(c.items, ["b", "a", "c"]);
        assert_eq!(c.games, [(1, 0), (2, 1)]);
    }

    #[test]
    fn bad_winner_reports_its_line() {
        let f = file("item_i,item_j,winner\na,b,a\na,b,z\n");
        let e = read_comparisons(f.path(), None).unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
    }

    #[test]
    fn fixed_items_reject_strangers() {
        let f = file("item_i,item_j,winner\na,q,a\n");
        let items = ["a".to_string(), "b".to_string()];
        let e = read_comparisons(f.path(), Some(&items)).unwrap_err().to_string();
        assert!(e.contains("unknown item \"q\""), "{e}");
    }

    #[test]
    fn features_parse_and_flag_bad_cells() {
        let f = file("x,y\n1,2\n3,4\n");
        let d = read_features(f.path()).unwrap();
        assert_eq!(d.names, ["x", "y"]);
        assert_eq!(d.data.unwrap().row(1), [3.0, 4.0]);
        let f = file("x,y\n1,2\n3,oops\n");
        let e = read_features(f.path()).unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("y"), "{e}");
        assert!(read_features(file("x,y\n").path()).unwrap().data.is_none());
    }

    #[test]
    fn scores_group_by_name() {
        let f = file("group,value\nu,1\nv,2\nu,3\n");
        let s = read_scores(f.path(), None).unwrap();
        assert_eq!(s.groups, ["u", "v"]);
        assert_eq!(s.values, [vec![1.0, 3.0], vec![2.0]]);
    }

    #[test]
    fn wrong_header_is_line_one() {
        let f = file("a,b\n1,2\n");
        let e = read_scores(f.path(), None).unwrap_err().to_string();
        assert!(e.contains("line 1"), "{e}");
    }
}
