//! Static catalogs shared across the pipeline: the 14 supported meeting
//! types (with objectives and expected outcomes fed to the scene planner),
//! the 22 psychologically grounded social roles participants can be
//! assigned, and the contradiction table used to keep per-scene role
//! assignments coherent.

/// A meeting type with the planner-facing objectives and outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeetingTypeInfo {
    pub name: &'static str,
    pub objectives: &'static [&'static str],
    pub expected_outcomes: &'static [&'static str],
}

/// All supported meeting types. `MeetingConfig::meeting_type` must match one
/// of these names exactly.
pub const MEETING_TYPES: &[MeetingTypeInfo] = &[
    MeetingTypeInfo {
        name: "Brainstorming Session",
        objectives: &[
            "Generate a wide range of ideas",
            "Encourage creative thinking",
            "Foster a collaborative environment",
        ],
        expected_outcomes: &[
            "List of potential ideas",
            "Prioritized concepts for further exploration",
        ],
    },
    MeetingTypeInfo {
        name: "Decision-Making Meeting",
        objectives: &[
            "Evaluate options",
            "Weigh pros and cons",
            "Reach a consensus or make a decision",
        ],
        expected_outcomes: &[
            "Finalized decision",
            "Action items with assigned responsibilities",
        ],
    },
    MeetingTypeInfo {
        name: "Problem-Solving Meeting",
        objectives: &[
            "Identify the root cause of a problem",
            "Analyze potential solutions",
            "Implement actionable solutions",
        ],
        expected_outcomes: &[
            "Clear understanding of the problem",
            "Viable solutions identified",
            "Action plan for implementation",
        ],
    },
    MeetingTypeInfo {
        name: "Training and Workshop Session",
        objectives: &[
            "Educate participants on new skills or knowledge",
            "Provide hands-on training",
            "Assess participant understanding",
        ],
        expected_outcomes: &[
            "Enhanced participant skills",
            "Increased knowledge in specific areas",
            "Preparedness to apply new skills",
        ],
    },
    MeetingTypeInfo {
        name: "Strategic Planning Meeting",
        objectives: &[
            "Define long-term organizational goals",
            "Develop strategies",
            "Allocate resources effectively",
        ],
        expected_outcomes: &[
            "Comprehensive strategic plan",
            "Defined organizational objectives",
            "Resource allocation roadmap",
        ],
    },
    MeetingTypeInfo {
        name: "Committee or Board Meeting",
        objectives: &[
            "Review and discuss policies",
            "Make governance decisions",
            "Oversee organizational performance",
        ],
        expected_outcomes: &[
            "Approved or revised policies",
            "Governance decisions made",
            "Reviewed organizational performance",
        ],
    },
    MeetingTypeInfo {
        name: "Innovation Forum",
        objectives: &[
            "Encourage innovative thinking",
            "Explore new opportunities",
            "Foster a culture of innovation",
        ],
        expected_outcomes: &[
            "Generated innovative ideas",
            "Identified new opportunities",
            "Enhanced culture of innovation",
        ],
    },
    MeetingTypeInfo {
        name: "Agile/Scrum Meeting",
        objectives: &[
            "Facilitate daily progress updates",
            "Plan and prioritize sprint tasks",
            "Review sprint outcomes",
        ],
        expected_outcomes: &[
            "Daily progress transparency",
            "Well-defined sprint plans",
            "Identified process improvements",
        ],
    },
    MeetingTypeInfo {
        name: "Remote or Virtual Meeting",
        objectives: &[
            "Facilitate collaboration among remote participants",
            "Share information and updates",
            "Coordinate tasks virtually",
        ],
        expected_outcomes: &[
            "Effective virtual collaboration",
            "Shared information and updates",
            "Coordinated tasks and projects",
        ],
    },
    MeetingTypeInfo {
        name: "Project Kick-Off Meeting",
        objectives: &[
            "Introduce project goals and objectives",
            "Define team roles and responsibilities",
            "Establish project timelines",
        ],
        expected_outcomes: &[
            "Clear project roadmap",
            "Assigned roles and responsibilities",
            "Initial project timeline established",
        ],
    },
    MeetingTypeInfo {
        name: "Stakeholder Meeting",
        objectives: &[
            "Update stakeholders on project progress",
            "Gather stakeholder feedback",
            "Ensure alignment with expectations",
        ],
        expected_outcomes: &[
            "Informed stakeholders",
            "Collected valuable feedback",
            "Aligned project goals with expectations",
        ],
    },
    MeetingTypeInfo {
        name: "Casual Catch-Up",
        objectives: &[
            "Build team rapport",
            "Share updates",
            "Discuss non-work-related topics",
        ],
        expected_outcomes: &[
            "Strengthened team relationships",
            "Shared personal and professional insights",
        ],
    },
    MeetingTypeInfo {
        name: "Cross-Functional Meeting",
        objectives: &[
            "Facilitate collaboration across departments",
            "Align on shared project objectives",
            "Resolve interdepartmental issues",
        ],
        expected_outcomes: &[
            "Aligned project objectives",
            "Resolved cross-departmental issues",
            "Enhanced interdepartmental collaboration",
        ],
    },
    MeetingTypeInfo {
        name: "Retrospective Meeting",
        objectives: &[
            "Reflect on past performance",
            "Identify successes and areas for improvement",
            "Implement process enhancements",
        ],
        expected_outcomes: &[
            "Documented lessons learned",
            "Actionable improvement plans",
            "Enhanced future project processes",
        ],
    },
];

/// Looks up a meeting type by exact name.
pub fn meeting_type(name: &str) -> Option<&'static MeetingTypeInfo> {
    MEETING_TYPES.iter().find(|m| m.name == name)
}

/// Whether a social role serves the group or an individual agenda.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoleKind {
    Group,
    Individual,
}

/// A social role from the functional-roles taxonomy, with the description
/// handed to participants when the role is assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SocialRoleInfo {
    pub name: &'static str,
    pub kind: RoleKind,
    pub description: &'static str,
}

/// The 16 group-oriented and 6 individual (self-serving) social roles a
/// participant can take on within a scene.
pub const SOCIAL_ROLES: &[SocialRoleInfo] = &[
    SocialRoleInfo {
        name: "Initiator-Contributor",
        kind: RoleKind::Group,
        description: "Contributes new ideas and approaches and helps to start the conversation or steer it in a productive direction.",
    },
    SocialRoleInfo {
        name: "Information Giver",
        kind: RoleKind::Group,
        description: "Shares relevant information, data, or research that the group needs to make informed decisions.",
    },
    SocialRoleInfo {
        name: "Information Seeker",
        kind: RoleKind::Group,
        description: "Asks questions to gain clarity and obtain information from others.",
    },
    SocialRoleInfo {
        name: "Opinion Giver",
        kind: RoleKind::Group,
        description: "Shares their views and beliefs on topics under discussion.",
    },
    SocialRoleInfo {
        name: "Opinion Seeker",
        kind: RoleKind::Group,
        description: "Encourages others to share their opinions and beliefs in order to understand different perspectives.",
    },
    SocialRoleInfo {
        name: "Coordinator",
        kind: RoleKind::Group,
        description: "Connects different ideas and suggestions of the group to ensure that all relevant aspects are integrated.",
    },
    SocialRoleInfo {
        name: "Evaluator-Critic",
        kind: RoleKind::Group,
        description: "Analyzes and critically evaluates proposals or solutions to ensure their quality and feasibility.",
    },
    SocialRoleInfo {
        name: "Implementer",
        kind: RoleKind::Group,
        description: "Puts plans and decisions of the group into action and ensures practical implementation.",
    },
    SocialRoleInfo {
        name: "Recorder",
        kind: RoleKind::Group,
        description: "Documents the group's decisions, ideas, and actions in order to have a reference for future discussions.",
    },
    SocialRoleInfo {
        name: "Encourager",
        kind: RoleKind::Group,
        description: "Provides positive feedback and praise to boost the morale and motivation of group members.",
    },
    SocialRoleInfo {
        name: "Harmonizer",
        kind: RoleKind::Group,
        description: "Mediates conflicts and ensures that tensions in the group are reduced to promote a harmonious working environment.",
    },
    SocialRoleInfo {
        name: "Compromiser",
        kind: RoleKind::Group,
        description: "Helps the group find a middle ground when there are differences of opinion and encourages compromise in order to move forward.",
    },
    SocialRoleInfo {
        name: "Gatekeeper",
        kind: RoleKind::Group,
        description: "Ensures that all group members have the opportunity to express their opinions and encourages participation.",
    },
    SocialRoleInfo {
        name: "Standard Setter",
        kind: RoleKind::Group,
        description: "Emphasizes the importance of adhering to certain norms and standards within the group to ensure quality and efficiency.",
    },
    SocialRoleInfo {
        name: "Group Observer",
        kind: RoleKind::Group,
        description: "Monitors the dynamics of the group and provides feedback on how the group is functioning as a whole and what improvements can be made.",
    },
    SocialRoleInfo {
        name: "Follower",
        kind: RoleKind::Group,
        description: "Supports the group by following the ideas and decisions of others without actively driving the discussions.",
    },
    SocialRoleInfo {
        name: "Aggressor",
        kind: RoleKind::Individual,
        description: "Exhibits hostile behavior, criticizes others, or attempts to undermine the contributions of others.",
    },
    SocialRoleInfo {
        name: "Blocker",
        kind: RoleKind::Individual,
        description: "Frequently opposes ideas and suggestions without offering constructive alternatives and delays the group's progress.",
    },
    SocialRoleInfo {
        name: "Recognition Seeker",
        kind: RoleKind::Individual,
        description: "Tries to draw attention to themselves by emphasizing their own successes or focusing on their own importance.",
    },
    SocialRoleInfo {
        name: "Dominator",
        kind: RoleKind::Individual,
        description: "Tries to control the group by dominating the flow of conversation and imposing their own views.",
    },
    SocialRoleInfo {
        name: "Help Seeker",
        kind: RoleKind::Individual,
        description: "Seeks sympathy or support by presenting as insecure or helpless, often to avoid responsibility.",
    },
    SocialRoleInfo {
        name: "Special Interest Pleader",
        kind: RoleKind::Individual,
        description: "Brings their own interests or concerns to the discussion that do not align with the goals of the group.",
    },
];

/// Looks up a social role by name, case-insensitively.
pub fn social_role(name: &str) -> Option<&'static SocialRoleInfo> {
    SOCIAL_ROLES
        .iter()
        .find(|r| r.name.eq_ignore_ascii_case(name.trim()))
}

/// Roles that force open disagreement into a scene. Every scene's assignment
/// must include at least one of these somewhere in the cast.
pub const CONFLICT_ROLES: &[&str] = &["Aggressor", "Blocker"];

/// Role pairs that cannot coexist on one participant within a scene. When a
/// participant ends up with both after repair, the second (disruptive) member
/// of the pair is dropped.
pub const CONTRADICTORY_ROLE_PAIRS: &[(&str, &str)] = &[
    ("Initiator-Contributor", "Blocker"),
    ("Encourager", "Aggressor"),
    ("Harmonizer", "Aggressor"),
    ("Gatekeeper", "Dominator"),
    ("Follower", "Dominator"),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meeting_type_catalog_has_fourteen_entries() {
        assert_eq!(MEETING_TYPES.len(), 14);
        for info in MEETING_TYPES {
            assert!(!info.objectives.is_empty(), "{} has no objectives", info.name);
            assert!(
                !info.expected_outcomes.is_empty(),
                "{} has no expected outcomes",
                info.name
            );
        }
    }

    #[test]
    fn social_role_catalog_has_sixteen_group_and_six_individual_roles() {
        let group = SOCIAL_ROLES.iter().filter(|r| r.kind == RoleKind::Group).count();
        let individual = SOCIAL_ROLES
            .iter()
            .filter(|r| r.kind == RoleKind::Individual)
            .count();
        assert_eq!(group, 16);
        assert_eq!(individual, 6);
        for role in SOCIAL_ROLES {
            assert!(!role.description.is_empty(), "{} lacks a description", role.name);
        }
    }

    #[test]
    fn role_lookup_is_case_insensitive() {
        assert_eq!(social_role("blocker").unwrap().name, "Blocker");
        assert_eq!(social_role(" EVALUATOR-CRITIC ").unwrap().name, "Evaluator-Critic");
        assert!(social_role("Chairperson").is_none());
    }

    #[test]
    fn contradiction_pairs_reference_catalog_roles() {
        for (a, b) in CONTRADICTORY_ROLE_PAIRS {
            assert!(social_role(a).is_some(), "{a} missing from catalog");
            assert!(social_role(b).is_some(), "{b} missing from catalog");
        }
        for name in CONFLICT_ROLES {
            assert_eq!(social_role(name).unwrap().kind, RoleKind::Individual);
        }
    }
}
