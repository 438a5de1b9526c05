//! Cohomology of cyclic groups via the 2-periodic resolution.

use serde::{Deserialize, Serialize};

use crate::abelian::{hom_kernel, homology, FgAbGroup, GroupHom};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclicModule {
    pub group: FgAbGroup,
    pub sigma: GroupHom,
    pub n: u64,
}

impl CyclicModule {
    pub fn new(group: FgAbGroup, sigma: GroupHom, n: u64) -> Result<Self> {
        let m = CyclicModule { group, sigma, n };
        m.validate()?;
        Ok(m)
    }

    pub fn trivial(group: FgAbGroup) -> Self {
        CyclicModule {
            sigma: GroupHom::identity(group.clone()),
            group,
            n: 2,
        }
    }

    pub fn trivial_n(group: FgAbGroup, n: u64) -> Self {
        CyclicModule {
            n,
            ..Self::trivial(group)
        }
    }

    pub fn sign(group: FgAbGroup) -> Self {
        CyclicModule {
            sigma: GroupHom::scalar(group.clone(), -1),
            group,
            n: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::NotAnAction {
            n: self.n,
            reason: reason.into(),
        };
        if self.n == 0 {
            return Err(bad("group order must be positive"));
        }
        if self.sigma.source != self.group || self.sigma.target != self.group {
            return Err(bad("sigma is not an endomorphism of the module"));
        }
        let id = GroupHom::identity(self.group.clone());
        let mut pow = id.clone();
        for _ in 0..self.n {
            pow = self.sigma.compose(&pow)?;
        }
        if pow.sub(&id)?.is_zero() {
            if !self.sigma.is_iso() {
                return Err(bad("sigma is not invertible"));
            }
            Ok(())
        } else {
            Err(bad("sigma^n is not the identity"))
        }
    }

    fn sigma_minus_one(&self) -> Result<GroupHom> {
        self.sigma.sub(&GroupHom::identity(self.group.clone()))
    }

    fn norm(&self) -> Result<GroupHom> {
        let id = GroupHom::identity(self.group.clone());
        let mut acc = GroupHom::zero(self.group.clone(), self.group.clone());
        let mut pow = id;
        for _ in 0..self.n {
            acc = acc.add(&pow)?;
            pow = self.sigma.compose(&pow)?;
        }
        Ok(acc)
    }
}

pub fn group_cohomology(m: &CyclicModule, s: u32) -> Result<FgAbGroup> {
    m.validate()?;
    let t = m.sigma_minus_one()?;
    let n = m.norm()?;
    if s == 0 {
        return Ok(hom_kernel(&t).0);
    }
    if s % 2 == 1 {
        homology(&t, &n)
    } else {
        homology(&n, &t)
    }
}

pub fn cohomology_row(m: &CyclicModule, s_max: u32) -> Result<Vec<FgAbGroup>> {
    (0..=s_max).map(|s| group_cohomology(m, s)).collect()
}
