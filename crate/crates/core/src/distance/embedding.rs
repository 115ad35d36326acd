//! Precomputed molecule embeddings imported from CSV.

use std::collections::HashMap;
use std::path::Path;

use super::DistanceError;

/// Read-only table of fixed-dimension vectors keyed by molecule id.
///
/// File format: a header line `id,<dim>` (the literal `id,dim` is also
/// accepted, in which case the first row fixes the dimension), then one
/// `molecule_id,v1,...,vdim` row per molecule.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    rows: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize, rows: Vec<(String, Vec<f64>)>) -> Result<EmbeddingTable, DistanceError> {
        if dimension == 0 {
            return Err(DistanceError::InvalidParams(
                "embedding dimension must be positive".into(),
            ));
        }
        let mut map = HashMap::with_capacity(rows.len());
        for (k, (id, v)) in rows.into_iter().enumerate() {
            if v.len() != dimension {
                return Err(DistanceError::EmbeddingFormat {
                    line: k + 2,
                    reason: format!("expected {dimension} values, found {}", v.len()),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(DistanceError::EmbeddingFormat {
                    line: k + 2,
                    reason: "non-finite value".into(),
                });
            }
            if map.insert(id.clone(), v).is_some() {
                return Err(DistanceError::EmbeddingFormat {
                    line: k + 2,
                    reason: format!("duplicate id `{id}`"),
                });
            }
        }
        Ok(EmbeddingTable { dimension, rows: map })
    }

    pub fn parse(text: &str) -> Result<EmbeddingTable, DistanceError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(DistanceError::EmbeddingFormat {
            line: 1,
            reason: "empty file".into(),
        })?;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        if fields.len() != 2 || fields[0] != "id" {
            return Err(DistanceError::EmbeddingFormat {
                line: 1,
                reason: "header must be `id,<dim>`".into(),
            });
        }
        let mut dimension = match fields[1] {
            "dim" => None,
            d => Some(d.parse::<usize>().map_err(|_| DistanceError::EmbeddingFormat {
                line: 1,
                reason: format!("invalid dimension `{d}`"),
            })?),
        };
        let mut rows = Vec::new();
        for (k, line) in lines {
            let line_no = k + 1;
            let mut parts = line.split(',').map(str::trim);
            let id = parts.next().unwrap_or_default().to_string();
            if id.is_empty() {
                return Err(DistanceError::EmbeddingFormat {
                    line: line_no,
                    reason: "empty molecule id".into(),
                });
            }
            let values = parts
                .map(|p| {
                    p.parse::<f64>().map_err(|_| DistanceError::EmbeddingFormat {
                        line: line_no,
                        reason: format!("invalid number `{p}`"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let dim = *dimension.get_or_insert(values.len());
            if values.len() != dim {
                return Err(DistanceError::EmbeddingFormat {
                    line: line_no,
                    reason: format!("expected {dim} values, found {}", values.len()),
                });
            }
            rows.push((id, values));
        }
        let dimension = dimension.ok_or(DistanceError::EmbeddingFormat {
            line: 1,
            reason: "no rows and no declared dimension".into(),
        })?;
        EmbeddingTable::new(dimension, rows)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<EmbeddingTable, DistanceError> {
        EmbeddingTable::parse(&std::fs::read_to_string(path)?)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.rows.get(id).map(Vec::as_slice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_declared_dimension() {
        let t = EmbeddingTable::parse("id,2\nm1,0.5,1\nm2,-1,2e-1\n").unwrap();
        assert_eq!(t.dimension(), 2);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("m2"), Some(&[-1.0, 0.2][..]));
        assert_eq!(t.get("m3"), None);
    }

    #[test]
    fn parse_literal_header() {
        let t = EmbeddingTable::parse("id,dim\na,1,2,3\n").unwrap();
        assert_eq!(t.dimension(), 3);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(EmbeddingTable::parse("").is_err());
        assert!(EmbeddingTable::parse("name,2\na,1,2").is_err());
        assert!(EmbeddingTable::parse("id,2\na,1").is_err());
        assert!(EmbeddingTable::parse("id,2\na,1,x").is_err());
        assert!(EmbeddingTable::parse("id,1\na,NaN").is_err());
        assert!(EmbeddingTable::parse("id,1\na,1\na,2").is_err());
        assert!(EmbeddingTable::parse("id,0\n").is_err());
    }
}
