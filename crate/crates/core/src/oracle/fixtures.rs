use std::fs;
use std::path::{Path, PathBuf};

use crate::problems::Problem;
use crate::{Error, Result};

use super::OracleSolution;

/// Directory of oracle fixtures, one `<problem hash>.json` file per problem.
#[derive(Debug, Clone)]
pub struct FixtureStore {
    dir: PathBuf,
}

impl FixtureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    /// The stored solution for `problem`, if any. A file whose recorded hash
    /// differs from its name is reported as an error.
    pub fn load(&self, problem: &Problem) -> Result<Option<OracleSolution>> {
        let hash = problem.hash()?;
        let path = self.path_for(&hash);
        if !path.exists() {
            return Ok(None);
        }
        let sol: OracleSolution = serde_json::from_str(&fs::read_to_string(&path)?)?;
        if sol.problem_hash != hash {
            return Err(Error::Config(format!(
                "fixture {} records hash {}",
                path.display(),
                sol.problem_hash
            )));
        }
        Ok(Some(sol))
    }

    /// Writes the solution through a temporary file and a rename.
    pub fn store(&self, sol: &OracleSolution) -> Result<PathBuf> {
        if sol.problem_hash.is_empty() {
            return Err(Error::Parameter("fixture has no problem hash".into()));
        }
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(&sol.problem_hash);
        let tmp = self.dir.join(format!(".{}.tmp", sol.problem_hash));
        fs::write(&tmp, serde_json::to_string_pretty(sol)? + "\n")?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    /// Cached solution or a fresh oracle solve that is then stored. The flag
    /// tells whether the cache was hit.
    pub fn load_or_solve(&self, problem: &Problem) -> Result<(OracleSolution, bool)> {
        if let Some(sol) = self.load(problem)? {
            return Ok((sol, true));
        }
        let sol = super::solve(problem)?;
        self.store(&sol)?;
        Ok((sol, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{build_resource_allocation, ResourceData};

    #[test]
    fn second_request_hits_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::new(dir.path());
        let p = Problem::Aggregative(build_resource_allocation(&ResourceData::random(3, 1)).unwrap());
        let (a, cached) = store.load_or_solve(&p).unwrap();
        assert!(!cached);
        let (b, cached) = store.load_or_solve(&p).unwrap();
        assert!(cached);
        assert_eq!(a, b);
        assert!(store.path_for(&p.hash().unwrap()).exists());
    }

    #[test]
    fn mismatched_hash_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::new(dir.path());
        let p = Problem::Aggregative(build_resource_allocation(&ResourceData::random(2, 1)).unwrap());
        let mut sol = crate::oracle::solve(&p).unwrap();
        let hash = sol.problem_hash.clone();
        sol.problem_hash = "other".into();
        fs::write(store.path_for(&hash), serde_json::to_string(&sol).unwrap()).unwrap();
        assert!(store.load(&p).is_err());
    }
}
