//! Dataset manifest: a line-oriented text file.
//!
//! ```text
//! # comment
//! dims 256 256
//! camera c1 truth/c1.prnumat
//! image public pub-0000 images/pub-0000.pgm c1
//! ```
//!
//! Image lines carry role, id, path relative to the manifest, and an optional
//! source camera label. Every image id must be unique across all splits.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::{Image, Role};

pub const FILE_NAME: &str = "manifest.txt";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub role: Role,
    pub id: String,
    pub path: PathBuf,
    pub source: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub dims: Option<(usize, usize)>,
    pub cameras: Vec<(String, PathBuf)>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Manifest::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Manifest(format!("line {}: {msg}: `{raw}`", lineno + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "dims" if fields.len() == 3 => {
                    let r = fields[1].parse().map_err(|_| bad("bad rows"))?;
                    let c = fields[2].parse().map_err(|_| bad("bad cols"))?;
                    m.dims = Some((r, c));
                }
                "camera" if fields.len() == 3 => {
                    m.cameras.push((fields[1].to_string(), PathBuf::from(fields[2])));
                }
                "image" if fields.len() == 4 || fields.len() == 5 => {
                    let role: Role = fields[1].parse().map_err(|_| bad("unknown role"))?;
                    m.entries.push(ManifestEntry {
                        role,
                        id: fields[2].to_string(),
                        path: PathBuf::from(fields[3]),
                        source: fields.get(4).map(|s| s.to_string()),
                    });
                }
                _ => return Err(bad("unrecognized line")),
            }
        }
        m.check_hygiene()?;
        Ok(m)
    }

    /// No image id may appear twice, in the same split or across splits.
    pub fn check_hygiene(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Manifest(format!(
                    "image id `{}` appears more than once (split hygiene)",
                    e.id
                )));
            }
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# prnu-triangle dataset manifest v1\n");
        if let Some((r, c)) = self.dims {
            let _ = writeln!(out, "dims {r} {c}");
        }
        for (id, path) in &self.cameras {
            let _ = writeln!(out, "camera {id} {}", path.display());
        }
        for e in &self.entries {
            let _ = write!(out, "image {} {} {}", e.role, e.id, e.path.display());
            if let Some(s) = &e.source {
                let _ = write!(out, " {s}");
            }
            out.push('\n');
        }
        out
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        super::write_atomic(path, self.render().as_bytes())
    }

    pub fn entries_with(&self, role: Role) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.role == role)
    }

    /// Loads every image of `role`, resolving paths against `base`.
    pub fn load_role(&self, base: &Path, role: Role) -> Result<Vec<Image>> {
        self.entries_with(role)
            .map(|e| {
                let mut img = super::pgm::read(&base.join(&e.path), &e.id)?.with_role(role);
                img.source_id = e.source.clone();
                if let Some(d) = self.dims {
                    if img.dims() != d {
                        return Err(Error::Manifest(format!(
                            "image `{}` is {}x{}, manifest says {}x{}",
                            e.id,
                            img.dims().0,
                            img.dims().1,
                            d.0,
                            d.1
                        )));
                    }
                }
                Ok(img)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_render_round_trip() {
        let text =
            "# hi\ndims 4 6\ncamera c1 truth/c1.mat\nimage public a images/a.pgm c1\nimage reference b images/b.pgm\n";
        let m = Manifest::parse(text).unwrap();
        assert_eq!(m.dims, Some((4, 6)));
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].source.as_deref(), Some("c1"));
        assert_eq!(Manifest::parse(&m.render()).unwrap(), m);
    }

    #[test]
    fn overlap_between_splits_is_rejected() {
        let text = "image public a a.pgm\nimage line-fit a a.pgm\n";
        assert!(matches!(Manifest::parse(text), Err(Error::Manifest(_))));
        assert!(Manifest::parse("image nowhere a a.pgm\n").is_err());
        assert!(Manifest::parse("bogus line\n").is_err());
    }
}
