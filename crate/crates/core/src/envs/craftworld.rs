//! Crafting gridworld with an egocentric window and an item ladder.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Environment, StepOutcome};
use crate::error::{ForgerError, Result};
use crate::types::{Action, Inventory, Observation};

/// Movement, interact and no-op precede the craft actions.
pub const BASE_ACTIONS: usize = 6;
const ACT_UP: usize = 0;
const ACT_DOWN: usize = 1;
const ACT_LEFT: usize = 2;
const ACT_RIGHT: usize = 3;
const ACT_INTERACT: usize = 4;

/// Inventory counts are scaled by this and clipped to 1 in observations.
const COUNT_SCALE: f64 = 16.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tile {
    Empty,
    Tree,
    Stone,
    IronVein,
    DiamondVein,
}

impl Tile {
    pub const ALL: [Tile; 5] = [
        Tile::Empty,
        Tile::Tree,
        Tile::Stone,
        Tile::IronVein,
        Tile::DiamondVein,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Via {
    Craft,
    Harvest(Tile),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub output: String,
    pub yields: u32,
    pub inputs: BTreeMap<String, u32>,
    pub via: Via,
    pub required_tool: Option<String>,
}

impl Recipe {
    pub fn harvest(output: &str, tile: Tile, tool: Option<&str>) -> Self {
        Recipe {
            output: output.into(),
            yields: 1,
            inputs: BTreeMap::new(),
            via: Via::Harvest(tile),
            required_tool: tool.map(String::from),
        }
    }

    pub fn craft(output: &str, yields: u32, inputs: &[(&str, u32)], tool: Option<&str>) -> Self {
        Recipe {
            output: output.into(),
            yields,
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            via: Via::Craft,
            required_tool: tool.map(String::from),
        }
    }
}

/// Item rewards for the acquisition ladder.
pub fn ladder_reward(item: &str) -> Option<f64> {
    Some(match item {
        "log" => 1.0,
        "planks" => 2.0,
        "stick" => 4.0,
        "crafting_table" => 4.0,
        "wooden_pickaxe" => 8.0,
        "cobblestone" => 16.0,
        "furnace" => 32.0,
        "stone_pickaxe" => 32.0,
        "iron_ore" => 64.0,
        "iron_ingot" => 128.0,
        "iron_pickaxe" => 256.0,
        "diamond" => 1024.0,
        _ => return None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CraftWorldConfig {
    pub grid_size: usize,
    /// Side of the egocentric view; odd.
    pub window: usize,
    /// Ordered; the last recipe's output completes the task.
    pub recipes: Vec<Recipe>,
    pub reward_table: BTreeMap<String, f64>,
    pub max_steps: usize,
    pub resource_density: BTreeMap<Tile, f64>,
    /// Reward every acquisition instead of only the first of each item.
    pub dense: bool,
}

impl Default for CraftWorldConfig {
    /// Seven-item chain up to the stone pickaxe.
    fn default() -> Self {
        Self::with_recipes(vec![
            Recipe::harvest("log", Tile::Tree, None),
            Recipe::craft("planks", 4, &[("log", 1)], None),
            Recipe::craft("stick", 4, &[("planks", 2)], None),
            Recipe::craft("crafting_table", 1, &[("planks", 4)], None),
            Recipe::craft(
                "wooden_pickaxe",
                1,
                &[("planks", 3), ("stick", 2)],
                Some("crafting_table"),
            ),
            Recipe::harvest("cobblestone", Tile::Stone, Some("wooden_pickaxe")),
            Recipe::craft(
                "stone_pickaxe",
                1,
                &[("cobblestone", 3), ("stick", 2)],
                Some("crafting_table"),
            ),
        ])
    }
}

impl CraftWorldConfig {
    /// Default geometry around a custom recipe list, rewards from the ladder.
    pub fn with_recipes(recipes: Vec<Recipe>) -> Self {
        let reward_table = recipes
            .iter()
            .map(|r| (r.output.clone(), ladder_reward(&r.output).unwrap_or(1.0)))
            .collect();
        CraftWorldConfig {
            grid_size: 8,
            window: 5,
            recipes,
            reward_table,
            max_steps: 200,
            resource_density: [
                (Tile::Tree, 0.15),
                (Tile::Stone, 0.1),
                (Tile::IronVein, 0.03),
                (Tile::DiamondVein, 0.02),
            ]
            .into_iter()
            .collect(),
            dense: false,
        }
    }

    /// log, planks, wooden_pickaxe.
    pub fn three_item() -> Self {
        Self::with_recipes(vec![
            Recipe::harvest("log", Tile::Tree, None),
            Recipe::craft("planks", 4, &[("log", 1)], None),
            Recipe::craft("wooden_pickaxe", 1, &[("planks", 3)], None),
        ])
    }

    /// log, planks, stick, crafting_table, wooden_pickaxe.
    pub fn five_item() -> Self {
        let mut c = Self::default();
        c.recipes.truncate(5);
        c.reward_table
            .retain(|k, _| c.recipes.iter().any(|r| &r.output == k));
        c
    }

    /// The whole ladder up to the diamond.
    pub fn full_ladder() -> Self {
        let mut recipes = Self::default().recipes;
        recipes.extend([
            Recipe::craft("furnace", 1, &[("cobblestone", 8)], Some("crafting_table")),
            Recipe::harvest("iron_ore", Tile::IronVein, Some("stone_pickaxe")),
            Recipe::craft("iron_ingot", 1, &[("iron_ore", 1)], Some("furnace")),
            Recipe::craft(
                "iron_pickaxe",
                1,
                &[("iron_ingot", 3), ("stick", 2)],
                Some("crafting_table"),
            ),
            Recipe::harvest("diamond", Tile::DiamondVein, Some("iron_pickaxe")),
        ]);
        let mut c = Self::with_recipes(recipes);
        c.max_steps = 400;
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ForgerError::InvalidConfig(m));
        if self.grid_size < 2 {
            return bad(format!("grid_size {} < 2", self.grid_size));
        }
        if self.window == 0 || self.window.is_multiple_of(2) || self.window > self.grid_size {
            return bad(format!(
                "window {} must be odd and <= grid_size {}",
                self.window, self.grid_size
            ));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        if self.recipes.is_empty() {
            return bad("no recipes".into());
        }
        let mut known = BTreeSet::new();
        for (i, r) in self.recipes.iter().enumerate() {
            if r.yields == 0 {
                return bad(format!("recipe {i} ({}) yields nothing", r.output));
            }
            if !known.insert(r.output.clone()) {
                return bad(format!("duplicate recipe output {}", r.output));
            }
            match r.via {
                Via::Craft => {
                    if r.inputs.is_empty() || r.inputs.values().any(|&c| c == 0) {
                        return bad(format!("craft recipe {} needs positive inputs", r.output));
                    }
                }
                Via::Harvest(Tile::Empty) => {
                    return bad(format!("harvest recipe {} has no tile source", r.output));
                }
                Via::Harvest(_) => {
                    if !r.inputs.is_empty() {
                        return bad(format!("harvest recipe {} takes no inputs", r.output));
                    }
                }
            }
            // Inputs and tools must come from earlier recipes: keeps the
            // ladder acyclic and topologically ordered.
            for dep in r.inputs.keys().chain(r.required_tool.iter()) {
                if dep == &r.output || !self.recipes[..i].iter().any(|p| &p.output == dep) {
                    return bad(format!(
                        "recipe {} depends on {dep}, which no earlier recipe produces",
                        r.output
                    ));
                }
            }
            if !self.reward_table.contains_key(&r.output) {
                return bad(format!("reward_table lacks recipe output {}", r.output));
            }
        }
        for (tile, d) in &self.resource_density {
            if !(0.0..=1.0).contains(d) || *tile == Tile::Empty {
                return bad(format!("bad resource density {d} for {tile:?}"));
            }
        }
        Ok(())
    }

    pub fn items(&self) -> Vec<String> {
        self.recipes.iter().map(|r| r.output.clone()).collect()
    }

    pub fn craft_recipes(&self) -> Vec<usize> {
        (0..self.recipes.len())
            .filter(|&i| self.recipes[i].via == Via::Craft)
            .collect()
    }

    pub fn num_actions(&self) -> usize {
        BASE_ACTIONS + self.craft_recipes().len()
    }

    pub fn obs_dim(&self) -> usize {
        self.window * self.window * Tile::ALL.len() + self.recipes.len()
    }

    pub fn final_item(&self) -> &str {
        &self.recipes.last().expect("validated non-empty").output
    }

    /// Action index that applies recipe `recipe`, if it is a craft recipe.
    pub fn craft_action(&self, recipe: usize) -> Option<Action> {
        self.craft_recipes()
            .iter()
            .position(|&r| r == recipe)
            .map(|p| Action(BASE_ACTIONS + p))
    }

    pub fn recipe_for(&self, item: &str) -> Option<usize> {
        self.recipes.iter().position(|r| r.output == item)
    }

    /// Maximal episode return in sparse mode.
    pub fn max_sparse_return(&self) -> f64 {
        self.recipes
            .iter()
            .map(|r| self.reward_table[&r.output])
            .sum()
    }
}

/// CraftWorld state plus its fixed config.
#[derive(Clone, Debug)]
pub struct CraftWorld {
    config: CraftWorldConfig,
    craft_recipes: Vec<usize>,
    grid: Vec<Tile>,
    pos: (usize, usize),
    inventory: Inventory,
    /// Total gained this episode, ignoring consumption.
    cumulative: Inventory,
    acquired: BTreeSet<String>,
    steps: usize,
    done: bool,
}

impl CraftWorld {
    pub fn new(config: CraftWorldConfig) -> Result<Self> {
        config.validate()?;
        let g = config.grid_size;
        Ok(CraftWorld {
            craft_recipes: config.craft_recipes(),
            grid: vec![Tile::Empty; g * g],
            pos: (0, 0),
            inventory: Inventory::new(),
            cumulative: Inventory::new(),
            acquired: BTreeSet::new(),
            steps: 0,
            done: false,
            config,
        })
    }

    pub fn config(&self) -> &CraftWorldConfig {
        &self.config
    }

    pub fn position(&self) -> (usize, usize) {
        self.pos
    }

    pub fn tile(&self, row: usize, col: usize) -> Tile {
        self.grid[row * self.config.grid_size + col]
    }

    pub fn set_tile(&mut self, row: usize, col: usize, tile: Tile) {
        let g = self.config.grid_size;
        self.grid[row * g + col] = tile;
    }

    pub fn set_position(&mut self, row: usize, col: usize) {
        self.pos = (row, col);
    }

    pub fn set_inventory(&mut self, inventory: Inventory) {
        self.inventory = inventory;
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn cumulative(&self) -> &Inventory {
        &self.cumulative
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Nearest tile of type `tile` by Manhattan distance, ties to row-major order.
    pub fn nearest(&self, tile: Tile) -> Option<(usize, usize)> {
        let g = self.config.grid_size;
        let (r, c) = self.pos;
        (0..g * g)
            .filter(|&i| self.grid[i] == tile)
            .map(|i| (i / g, i % g))
            .min_by_key(|&(tr, tc)| r.abs_diff(tr) + c.abs_diff(tc))
    }

    /// Harvest counts each tile type must supply for one expert run.
    fn tiles_needed(&self) -> BTreeMap<Tile, usize> {
        let mut out = BTreeMap::new();
        for step in super::craftworld_plan(&self.config) {
            if let Via::Harvest(t) = self.config.recipes[step.recipe].via {
                *out.entry(t).or_insert(0) += step.actions as usize;
            }
        }
        out
    }

    pub fn observe(&self) -> Observation {
        let w = self.config.window;
        let g = self.config.grid_size as isize;
        let half = (w / 2) as isize;
        let nt = Tile::ALL.len();
        let mut f = vec![0.0; self.config.obs_dim()];
        let (r0, c0) = (self.pos.0 as isize, self.pos.1 as isize);
        for dr in -half..=half {
            for dc in -half..=half {
                let (r, c) = (r0 + dr, c0 + dc);
                if r < 0 || c < 0 || r >= g || c >= g {
                    continue;
                }
                let cell = ((dr + half) as usize * w + (dc + half) as usize) * nt;
                f[cell + self.tile(r as usize, c as usize).index()] = 1.0;
            }
        }
        let base = w * w * nt;
        for (i, r) in self.config.recipes.iter().enumerate() {
            f[base + i] = (self.inventory.get(&r.output) as f64 / COUNT_SCALE).min(1.0);
        }
        Observation(f)
    }

    fn has_tool(&self, recipe: &Recipe) -> bool {
        recipe
            .required_tool
            .as_ref()
            .is_none_or(|t| self.inventory.get(t) > 0)
    }

    /// Whether `recipe` could be applied now (tool and inputs present).
    pub fn can_craft(&self, recipe: usize) -> bool {
        let r = &self.config.recipes[recipe];
        r.via == Via::Craft
            && self.has_tool(r)
            && r.inputs.iter().all(|(k, &c)| self.inventory.get(k) >= c)
    }

    /// Applies the game rules for one action; invalid actions are no-ops.
    /// Returns `(reward, items gained)`.
    fn apply_rules(&mut self, action: Action) -> (f64, Inventory) {
        let g = self.config.grid_size;
        let (r, c) = self.pos;
        let mut gained = Inventory::new();
        match action.0 {
            ACT_UP => self.pos.0 = r.saturating_sub(1),
            ACT_DOWN => self.pos.0 = (r + 1).min(g - 1),
            ACT_LEFT => self.pos.1 = c.saturating_sub(1),
            ACT_RIGHT => self.pos.1 = (c + 1).min(g - 1),
            ACT_INTERACT => {
                let tile = self.tile(r, c);
                let recipe = self
                    .config
                    .recipes
                    .iter()
                    .find(|rec| rec.via == Via::Harvest(tile));
                if let Some(rec) = recipe {
                    if self.has_tool(rec) {
                        gained.add(&rec.output, rec.yields);
                        self.set_tile(r, c, Tile::Empty);
                    }
                }
            }
            a if a >= BASE_ACTIONS && a - BASE_ACTIONS < self.craft_recipes.len() => {
                let idx = self.craft_recipes[a - BASE_ACTIONS];
                if self.can_craft(idx) {
                    let rec = &self.config.recipes[idx];
                    for (k, &cnt) in &rec.inputs {
                        let have = self.inventory.0.get_mut(k).expect("checked by can_craft");
                        *have -= cnt;
                    }
                    gained.add(&rec.output, rec.yields);
                }
            }
            _ => {}
        }
        let mut reward = 0.0;
        for (item, count) in gained.iter() {
            self.inventory.add(item, count);
            self.cumulative.add(item, count);
            let first = self.acquired.insert(item.to_string());
            if first || self.config.dense {
                reward += self.config.reward_table.get(item).copied().unwrap_or(0.0);
            }
        }
        (reward, gained)
    }
}

impl Environment for CraftWorld {
    fn name(&self) -> &'static str {
        "craftworld"
    }

    fn obs_dim(&self) -> usize {
        self.config.obs_dim()
    }

    fn num_actions(&self) -> usize {
        BASE_ACTIONS + self.craft_recipes.len()
    }

    fn max_steps(&self) -> usize {
        self.config.max_steps
    }

    fn reset(&mut self, seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = self.config.grid_size;
        let cells = g * g;
        self.grid = vec![Tile::Empty; cells];
        let mut order: Vec<usize> = (0..cells).collect();
        order.shuffle(&mut rng);
        let needed = self.tiles_needed();
        let mut next = 0;
        for tile in &Tile::ALL[1..] {
            let density = self
                .config
                .resource_density
                .get(tile)
                .copied()
                .unwrap_or(0.0);
            let mut count = (density * cells as f64).round() as usize;
            if let Some(&n) = needed.get(tile) {
                count = count.max(n + 1);
            }
            // leave at least one free cell for the agent
            let count = count.min(cells - 1 - next);
            for &cell in &order[next..next + count] {
                self.grid[cell] = *tile;
            }
            next += count;
        }
        let free: Vec<usize> = (0..cells)
            .filter(|&i| self.grid[i] == Tile::Empty)
            .collect();
        let start = free[rng.gen_range(0..free.len())];
        self.pos = (start / g, start % g);
        self.inventory = Inventory::new();
        self.cumulative = Inventory::new();
        self.acquired.clear();
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.done {
            return Err(ForgerError::Contract(
                "step on a terminal CraftWorld state".into(),
            ));
        }
        let (reward, gained) = self.apply_rules(action);
        self.steps += 1;
        let finished = self.inventory.get(self.config.final_item()) > 0;
        self.done = finished || self.steps >= self.config.max_steps;
        Ok(StepOutcome {
            obs: self.observe(),
            reward,
            done: self.done,
            inventory_delta: gained,
        })
    }

    fn inventory(&self) -> &Inventory {
        &self.inventory
    }

    fn craft_outputs(&self) -> BTreeMap<usize, String> {
        self.craft_recipes
            .iter()
            .enumerate()
            .map(|(p, &r)| (BASE_ACTIONS + p, self.config.recipes[r].output.clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn world(config: CraftWorldConfig) -> CraftWorld {
        let mut w = CraftWorld::new(config).unwrap();
        w.reset(1);
        w
    }

    #[test]
    fn observation_layout_counts_slots() {
        let cfg = CraftWorldConfig::default();
        let mut w = CraftWorld::new(cfg.clone()).unwrap();
        let obs = w.reset(3);
        // 5*5 window, 5 tile types, 7 items
        assert_eq!(obs.len(), 5 * 5 * 5 + 7);
        assert_eq!(cfg.obs_dim(), obs.len());
        // every in-bounds cell is exactly one-hot
        let window: f64 = obs.0[..125].iter().sum();
        assert!((9.0..=25.0).contains(&window));
    }

    #[test]
    fn reset_is_deterministic() {
        let cfg = CraftWorldConfig::default();
        let mut a = CraftWorld::new(cfg.clone()).unwrap();
        let mut b = CraftWorld::new(cfg).unwrap();
        let oa = a.reset(7);
        let ob = b.reset(7);
        assert_eq!(
            oa.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            ob.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(a.grid, b.grid);
    }

    #[test]
    fn interact_on_empty_tile_is_noop() {
        let mut w = world(CraftWorldConfig::default());
        w.set_tile(0, 0, Tile::Empty);
        w.set_position(0, 0);
        let out = w.step(Action(ACT_INTERACT)).unwrap();
        assert_eq!(out.reward, 0.0);
        assert!(out.inventory_delta.is_empty());
    }

    #[test]
    fn first_log_and_planks_rewards() {
        let mut w = world(CraftWorldConfig::default());
        w.set_tile(2, 2, Tile::Tree);
        w.set_position(2, 2);
        let out = w.step(Action(ACT_INTERACT)).unwrap();
        assert_eq!(out.reward, 1.0);
        assert_eq!(out.inventory_delta.get("log"), 1);
        assert_eq!(w.tile(2, 2), Tile::Empty);
        let planks = w.config().craft_action(1).unwrap();
        let out = w.step(planks).unwrap();
        assert_eq!(out.reward, 2.0);
        assert_eq!(w.inventory().get("log"), 0);
        assert_eq!(w.inventory().get("planks"), 4);
    }

    #[test]
    fn craft_without_inputs_changes_nothing() {
        let mut w = world(CraftWorldConfig::default());
        let before_pos = w.position();
        let planks = w.config().craft_action(1).unwrap();
        let out = w.step(planks).unwrap();
        assert_eq!(out.reward, 0.0);
        assert!(out.inventory_delta.is_empty());
        assert!(w.inventory().is_empty());
        assert_eq!(w.position(), before_pos);
    }

    #[test]
    fn harvest_requires_tool() {
        let mut w = world(CraftWorldConfig::default());
        w.set_tile(1, 1, Tile::Stone);
        w.set_position(1, 1);
        let out = w.step(Action(ACT_INTERACT)).unwrap();
        assert!(out.inventory_delta.is_empty());
        assert_eq!(w.tile(1, 1), Tile::Stone);
        w.set_inventory([("wooden_pickaxe", 1u32)].into_iter().collect());
        let out = w.step(Action(ACT_INTERACT)).unwrap();
        assert_eq!(out.inventory_delta.get("cobblestone"), 1);
    }

    #[test]
    fn movement_blocked_at_border() {
        let mut w = world(CraftWorldConfig::default());
        w.set_position(0, 0);
        w.step(Action(ACT_UP)).unwrap();
        w.step(Action(ACT_LEFT)).unwrap();
        assert_eq!(w.position(), (0, 0));
        w.set_position(7, 7);
        w.step(Action(ACT_DOWN)).unwrap();
        w.step(Action(ACT_RIGHT)).unwrap();
        assert_eq!(w.position(), (7, 7));
    }

    #[test]
    fn stepping_terminal_state_fails() {
        let mut cfg = CraftWorldConfig::three_item();
        cfg.max_steps = 1;
        let mut w = world(cfg);
        assert!(w.step(Action(5)).unwrap().done);
        assert!(matches!(w.step(Action(5)), Err(ForgerError::Contract(_))));
    }

    #[test]
    fn sparse_rewards_paid_once_per_item() {
        let mut w = world(CraftWorldConfig::default());
        let mut paid = 0.0;
        for col in 0..3 {
            w.set_tile(0, col, Tile::Tree);
            w.set_position(0, col);
            paid += w.step(Action(ACT_INTERACT)).unwrap().reward;
        }
        assert_eq!(paid, 1.0);
        assert_eq!(w.inventory().get("log"), 3);
    }

    #[test]
    fn dense_rewards_every_acquisition() {
        let mut cfg = CraftWorldConfig::default();
        cfg.dense = true;
        let mut w = world(cfg);
        let mut paid = 0.0;
        for col in 0..3 {
            w.set_tile(0, col, Tile::Tree);
            w.set_position(0, col);
            paid += w.step(Action(ACT_INTERACT)).unwrap().reward;
        }
        assert_eq!(paid, 3.0);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = CraftWorldConfig::default();
        c.window = 4;
        assert!(c.validate().is_err());
        let mut c = CraftWorldConfig::default();
        c.window = 9;
        assert!(c.validate().is_err());
        let mut c = CraftWorldConfig::default();
        c.reward_table.remove("stick");
        assert!(c.validate().is_err());
        let mut c = CraftWorldConfig::default();
        c.recipes.swap(0, 1);
        assert!(c.validate().is_err(), "planks before log must be rejected");
        let mut c = CraftWorldConfig::default();
        c.recipes[1].inputs.insert("log".into(), 0);
        assert!(c.validate().is_err());
        assert!(CraftWorldConfig::full_ladder().validate().is_ok());
    }

    #[test]
    fn reset_places_enough_resources() {
        let cfg = CraftWorldConfig::default();
        for seed in 0..20 {
            let mut w = CraftWorld::new(cfg.clone()).unwrap();
            w.reset(seed);
            let trees = w.grid.iter().filter(|&&t| t == Tile::Tree).count();
            let stones = w.grid.iter().filter(|&&t| t == Tile::Stone).count();
            assert!(
                trees >= 4 && stones >= 4,
                "seed {seed}: {trees} trees {stones} stones"
            );
            assert_eq!(w.tile(w.pos.0, w.pos.1), Tile::Empty);
        }
    }

    /// Items appear only through harvest or craft and vanish only as inputs.
    #[test]
    fn inventory_conservation_under_random_play() {
        let cfg = CraftWorldConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..30 {
            let mut w = CraftWorld::new(cfg.clone()).unwrap();
            w.reset(seed);
            while !w.is_done() {
                let before = w.inventory().clone();
                let a = Action(rng.gen_range(0..w.num_actions()));
                let tile = w.tile(w.pos.0, w.pos.1);
                let out = w.step(a).unwrap();
                let after = w.inventory().clone();
                let mut expected = before.clone();
                if a.0 == ACT_INTERACT {
                    if let Some(rec) = cfg.recipes.iter().find(|r| r.via == Via::Harvest(tile)) {
                        if !out.inventory_delta.is_empty() {
                            expected.add(&rec.output, rec.yields);
                        }
                    }
                } else if a.0 >= BASE_ACTIONS && !out.inventory_delta.is_empty() {
                    let rec = &cfg.recipes[cfg.craft_recipes()[a.0 - BASE_ACTIONS]];
                    for (k, &c) in &rec.inputs {
                        *expected.0.get_mut(k).unwrap() -= c;
                    }
                    expected.add(&rec.output, rec.yields);
                }
                assert_eq!(after, expected);
            }
        }
    }
}
