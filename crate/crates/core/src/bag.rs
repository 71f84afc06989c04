//! Token multisets and team rules.

use alloc::vec::Vec;

/// Two kinds of token. Under [`TeamRule::Plain`] `a` are ordinary tokens and `b`
/// marked ones (consumed last). Under [`TeamRule::Diff`] they are the two colors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bag {
    pub a: u32,
    pub b: u32,
}

impl Bag {
    pub const EMPTY: Bag = Bag { a: 0, b: 0 };

    pub fn plain(k: u32) -> Bag {
        Bag { a: k, b: 0 }
    }

    pub fn marked(k: u32) -> Bag {
        Bag { a: 0, b: k }
    }

    pub fn total(self) -> u32 {
        self.a + self.b
    }

    pub fn is_empty(self) -> bool {
        self.total() == 0
    }

    pub fn add(self, o: Bag) -> Bag {
        Bag { a: self.a + o.a, b: self.b + o.b }
    }

    pub fn sub(self, o: Bag) -> Bag {
        Bag { a: self.a - o.a, b: self.b - o.b }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Color {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TeamRule {
    /// Teams of exactly `sigma` tokens of any kind.
    Plain { sigma: u32 },
    /// Teams of one `a` token and one `b` token.
    Diff,
}

impl TeamRule {
    pub fn sigma(self) -> u32 {
        match self {
            TeamRule::Plain { sigma } => sigma,
            TeamRule::Diff => 2,
        }
    }

    pub fn teams(self, bag: Bag) -> u32 {
        match self {
            TeamRule::Plain { sigma } => bag.total() / sigma,
            TeamRule::Diff => bag.a.min(bag.b),
        }
    }

    /// Splits off as many teams as possible. Returns the teams and the remainder.
    pub fn split(self, bag: Bag) -> (Vec<Bag>, Bag) {
        let n = self.teams(bag);
        let mut rest = bag;
        let mut teams = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let t = match self {
                TeamRule::Plain { sigma } => {
                    let a = rest.a.min(sigma);
                    Bag { a, b: sigma - a }
                }
                TeamRule::Diff => Bag { a: 1, b: 1 },
            };
            rest = rest.sub(t);
            teams.push(t);
        }
        (teams, rest)
    }

    /// Color announced for a holding, used by the diff rule.
    pub fn color_of(self, bag: Bag) -> Color {
        if bag.a >= bag.b {
            Color::A
        } else {
            Color::B
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_prefers_ordinary_tokens() {
        let (teams, rest) = TeamRule::Plain { sigma: 3 }.split(Bag { a: 4, b: 3 });
        assert_eq!(teams, [Bag { a: 3, b: 0 }, Bag { a: 1, b: 2 }]);
        assert_eq!(rest, Bag { a: 0, b: 1 });
    }

    #[test]
    fn diff_pairs_colors() {
        let (teams, rest) = TeamRule::Diff.split(Bag { a: 3, b: 1 });
        assert_eq!(teams.len(), 1);
        assert_eq!(rest, Bag { a: 2, b: 0 });
    }

    proptest! {
        #[test]
        fn split_conserves(a in 0u32..100, b in 0u32..100, sigma in 1u32..20, diff: bool) {
            let rule = if diff { TeamRule::Diff } else { TeamRule::Plain { sigma } };
            let bag = Bag { a, b };
            let (teams, rest) = rule.split(bag);
            let sum = teams.iter().fold(rest, |acc, t| acc.add(*t));
            prop_assert_eq!(sum, bag);
            prop_assert_eq!(rule.teams(rest), 0);
            for t in teams {
                prop_assert_eq!(t.total(), rule.sigma());
            }
        }
    }
}
