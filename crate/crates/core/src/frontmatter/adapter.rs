use std::path::{Path, PathBuf};
use std::process::Command;

use super::IngestError;

/// Turns a PDF into plain text. The pipeline itself starts at text.
pub trait PdfTextAdapter {
    fn extract_text(&self, path: &Path) -> Result<String, IngestError>;
}

/// Runs the poppler `pdftotext` tool in layout-free mode.
#[derive(Debug, Clone)]
pub struct PdftotextAdapter {
    pub program: PathBuf,
    /// Last page to read; front matter sits at the start of a volume.
    pub last_page: Option<u32>,
}

impl Default for PdftotextAdapter {
    fn default() -> Self {
        PdftotextAdapter { program: PathBuf::from("pdftotext"), last_page: Some(30) }
    }
}

impl PdfTextAdapter for PdftotextAdapter {
    fn extract_text(&self, path: &Path) -> Result<String, IngestError> {
        let mut cmd = Command::new(&self.program);
        cmd.arg("-enc").arg("UTF-8");
        if let Some(last) = self.last_page {
            cmd.arg("-l").arg(last.to_string());
        }
        let out = cmd
            .arg(path)
            .arg("-")
            .output()
            .map_err(|e| IngestError::Pdf(format!("{}: {e}", self.program.display())))?;
        if !out.status.success() {
            return Err(IngestError::Pdf(String::from_utf8_lossy(&out.stderr).trim().to_string()));
        }
        String::from_utf8(out.stdout).map_err(|e| IngestError::Pdf(e.to_string()))
    }
}
