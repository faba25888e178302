//! The exact/approximate difference table as markdown.
//!
//! cargo run --example difference_table

use merkle_falsify::probability::{DIFF_TABLE_BITS, DIFF_TABLE_PATH_LENS};
use merkle_falsify::report::{ReportTable, TableFormat};
use merkle_falsify::diff_table;

fn main() -> merkle_falsify::Result<()> {
    let table = ReportTable::from_estimates(&diff_table(&DIFF_TABLE_BITS, &DIFF_TABLE_PATH_LENS)?);
    table.write(TableFormat::Markdown, std::io::stdout().lock())
}
