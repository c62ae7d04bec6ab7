//! JSON text frames exchanged with the browser client.

use serde::{Deserialize, Serialize};

use demomix_core::keys::KeySet;
use demomix_core::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentFrame {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

/// Server to client, once per tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "state")]
pub struct StateFrame {
    pub tick: u64,
    pub agent: AgentFrame,
    pub goal: Point,
    pub obstacles: Vec<Point>,
    pub reward: f64,
    pub episode: u64,
    pub terminal: bool,
    pub success: bool,
    pub recorded: u64,
}

impl StateFrame {
    pub fn from_world(world: &WorldState, tick: u64, reward: f64, episode: u64, terminal: bool, success: bool, recorded: u64) -> Self {
        Self {
            tick,
            agent: AgentFrame { x: world.agent_pos.x, y: world.agent_pos.y, vx: world.agent_vel.x, vy: world.agent_vel.y },
            goal: Point { x: world.goal_pos.x, y: world.goal_pos.y },
            obstacles: world.obstacles.iter().map(|o| Point { x: o.x, y: o.y }).collect(),
            reward,
            episode,
            terminal,
            success,
            recorded,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state frames always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlCmd {
    Reset,
    Finish,
}

/// Client to server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClientMessage {
    Keys { up: bool, down: bool, left: bool, right: bool },
    Control { cmd: ControlCmd },
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn keys(k: KeySet) -> Self {
        ClientMessage::Keys { up: k.up, down: k.down, left: k.left, right: k.right }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("client messages always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use demomix_core::env2d::N_OBSTACLES;
    use demomix_core::Vec2;
    use serde_json::{json, Value};

    #[test]
    fn state_frame_wire_shape() {
        let world = WorldState {
            agent_pos: Vec2::new(0.25, -0.5),
            agent_vel: Vec2::new(1.0, 0.0),
            goal_pos: Vec2::new(0.5, 0.5),
            obstacles: [Vec2::new(0.0, 0.75); N_OBSTACLES],
            step: 3,
        };
        let frame = StateFrame::from_world(&world, 7, -1.25, 2, false, false, 40);
        let v: Value = serde_json::from_str(&frame.to_json()).unwrap();
        let obstacle = json!({"x": 0.0, "y": 0.75});
        assert_eq!(
            v,
            json!({
                "type": "state",
                "tick": 7,
                "agent": {"x": 0.25, "y": -0.5, "vx": 1.0, "vy": 0.0},
                "goal": {"x": 0.5, "y": 0.5},
                "obstacles": vec![obstacle; 9],
                "reward": -1.25,
                "episode": 2,
                "terminal": false,
                "success": false,
                "recorded": 40
            })
        );
        let back: StateFrame = serde_json::from_value(v).unwrap();
        assert_eq!(back, frame);
    }

    #[test]
    fn client_messages_parse() {
        assert_eq!(
            ClientMessage::parse(r#"{"type":"keys","up":true,"down":false,"left":false,"right":true}"#).unwrap(),
            ClientMessage::Keys { up: true, down: false, left: false, right: true }
        );
        assert_eq!(
            ClientMessage::parse(r#"{"type":"control","cmd":"reset"}"#).unwrap(),
            ClientMessage::Control { cmd: ControlCmd::Reset }
        );
        assert_eq!(
            ClientMessage::parse(r#"{"type":"control","cmd":"finish"}"#).unwrap(),
            ClientMessage::Control { cmd: ControlCmd::Finish }
        );
        let k = ClientMessage::keys(KeySet { left: true, ..KeySet::NONE });
        assert_eq!(ClientMessage::parse(&k.to_json()).unwrap(), k);
    }

    #[test]
    fn malformed_messages_are_rejected() {
        for bad in [
            "",
            "not json",
            r#"{"type":"keys","up":true}"#,
            r#"{"type":"keys","up":1,"down":false,"left":false,"right":false}"#,
            r#"{"type":"control","cmd":"jump"}"#,
            r#"{"type":"teleport"}"#,
            r#"{"up":true,"down":false,"left":false,"right":false}"#,
        ] {
            assert!(ClientMessage::parse(bad).is_err(), "{bad}");
        }
    }
}
