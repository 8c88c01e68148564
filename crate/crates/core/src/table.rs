use thiserror::Error;

use crate::ingest::{Field, SeriesDataset};

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("column {name:?} has {got} rows, table has {expected}")]
    RowCount {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("duplicate column {0:?}")]
    Duplicate(String),
}

/// Named, equal-length numeric columns in time order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// All seven met fields of a dataset, named by [`Field::name`].
    pub fn from_dataset(ds: &SeriesDataset) -> Self {
        let mut t = FeatureTable::new();
        for f in Field::ALL {
            t.push(f.name(), ds.column(f))
                .expect("dataset columns share a length");
        }
        t
    }

    pub fn push(&mut self, name: impl Into<String>, column: Vec<f64>) -> Result<(), TableError> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(TableError::Duplicate(name));
        }
        if let Some(first) = self.columns.first() {
            if first.len() != column.len() {
                return Err(TableError::RowCount {
                    name,
                    expected: first.len(),
                    got: column.len(),
                });
            }
        }
        self.names.push(name);
        self.columns.push(column);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Result<usize, TableError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<&[f64], TableError> {
        Ok(&self.columns[self.index_of(name)?])
    }

    pub fn column_at(&self, idx: usize) -> &[f64] {
        &self.columns[idx]
    }

    /// A new table holding only `names`, in that order.
    pub fn select(&self, names: &[&str]) -> Result<FeatureTable, TableError> {
        let mut t = FeatureTable::new();
        for n in names {
            t.push(*n, self.column(n)?.to_vec())?;
        }
        Ok(t)
    }
}
