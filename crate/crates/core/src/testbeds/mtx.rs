use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

use crate::linalg::DenseMatrix;

#[derive(Debug, Error)]
pub enum MatrixMarketError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported Matrix Market format: {0}")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> MatrixMarketError {
    MatrixMarketError::Parse {
        line,
        message: message.into(),
    }
}

/// Square nonnegative matrix of edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    matrix: DenseMatrix,
}

impl AdjacencyMatrix {
    /// `None` if any entry is negative.
    pub fn new(matrix: DenseMatrix) -> Option<Self> {
        matrix.is_nonnegative().then_some(Self { matrix })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn nonzeros(&self) -> usize {
        self.matrix.as_slice().iter().filter(|&&v| v != 0.0).count()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Pattern,
    Real,
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<AdjacencyMatrix, MatrixMarketError> {
    parse_matrix_market(BufReader::new(File::open(path)?))
}

/// Parses `matrix coordinate {pattern|real} {general|symmetric}` files.
/// Pattern entries become 1.0; real entries keep their (nonnegative) value.
pub fn parse_matrix_market(reader: impl BufRead) -> Result<AdjacencyMatrix, MatrixMarketError> {
    let mut lines = reader.lines().enumerate().map(|(n, l)| (n + 1, l));

    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.first().map(String::as_str) != Some("%%matrixmarket") {
        return Err(parse_err(1, "missing %%MatrixMarket banner"));
    }
    if tokens.len() != 5 || tokens[1] != "matrix" {
        return Err(MatrixMarketError::UnsupportedFormat(header.trim().to_string()));
    }
    if tokens[2] != "coordinate" {
        return Err(MatrixMarketError::UnsupportedFormat(format!("{} storage", tokens[2])));
    }
    let field = match tokens[3].as_str() {
        "pattern" => Field::Pattern,
        "real" | "integer" => Field::Real,
        other => return Err(MatrixMarketError::UnsupportedFormat(format!("{other} field"))),
    };
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(MatrixMarketError::UnsupportedFormat(format!("{other} symmetry"))),
    };

    let mut size: Option<(usize, usize)> = None;
    let mut matrix: Option<DenseMatrix> = None;
    let mut seen = 0usize;
    for (n, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let Some((dim, nnz)) = size else {
            if fields.len() != 3 {
                return Err(parse_err(n, "size line must be 'rows cols nnz'"));
            }
            let nums: Vec<usize> = fields
                .iter()
                .map(|f| f.parse().map_err(|_| parse_err(n, format!("invalid integer '{f}'"))))
                .collect::<Result<_, _>>()?;
            if nums[0] != nums[1] {
                return Err(parse_err(n, format!("matrix must be square, got {}x{}", nums[0], nums[1])));
            }
            if nums[0] == 0 {
                return Err(parse_err(n, "matrix dimension must be at least 1"));
            }
            size = Some((nums[0], nums[2]));
            matrix = Some(DenseMatrix::zeros(nums[0]));
            continue;
        };
        let expected = if field == Field::Pattern { 2 } else { 3 };
        if fields.len() != expected {
            return Err(parse_err(n, format!("expected {expected} fields, got {}", fields.len())));
        }
        let index = |f: &str| -> Result<usize, MatrixMarketError> {
            let v: usize = f.parse().map_err(|_| parse_err(n, format!("invalid index '{f}'")))?;
            if v == 0 || v > dim {
                return Err(parse_err(n, format!("index {v} outside 1..={dim}")));
            }
            Ok(v - 1)
        };
        let (i, j) = (index(fields[0])?, index(fields[1])?);
        let value = match field {
            Field::Pattern => 1.0,
            Field::Real => {
                let v: f64 = fields[2].parse().map_err(|_| parse_err(n, format!("invalid value '{}'", fields[2])))?;
                if !v.is_finite() || v < 0.0 {
                    return Err(parse_err(n, format!("adjacency weight {v} must be finite and nonnegative")));
                }
                v
            }
        };
        seen += 1;
        if seen > nnz {
            return Err(parse_err(n, format!("more than the declared {nnz} entries")));
        }
        let m = matrix.as_mut().expect("allocated with the size line");
        m[(i, j)] = value;
        if symmetric {
            m[(j, i)] = value;
        }
    }
    let Some((_, nnz)) = size else {
        return Err(parse_err(1, "missing size line"));
    };
    if seen != nnz {
        return Err(parse_err(0, format!("declared {nnz} entries, found {seen}")));
    }
    Ok(AdjacencyMatrix {
        matrix: matrix.expect("allocated with the size line"),
    })
}
