"""medforge: profile-driven medical data-entry interfaces.

Compiles per-patient medical component profiles into data-entry UI
documents, validates submitted data against typed, bounded, and
relational constraints, persists accepted records, and raises alerts
for out-of-range readings.
"""

from .compiler import compile_profile, lower_to_widget_tree, widget_tree_to_json
from .model import (
    Descrip,
    MedComp,
    PatientProfile,
    RelationConstraint,
    RetrieveBinding,
    TriggerRule,
    ValueSpec,
    derive_entity_key,
    substitution_context,
)
from .profile_xml import (
    ProfileDiagnostic,
    ProfileValidationError,
    XmlError,
    parse_profile,
    serialize_profile,
    validate_profile,
)
from .template_engine import (
    Template,
    TemplateSet,
    instantiate,
    load_default_templates,
    load_template,
    load_template_dir,
)
from .uiml import BehaviorRule, Part, StyleProperty, UiDocument, parse_ui, serialize_ui
from .validation import (
    BoundFinding,
    SubmissionInput,
    SubmissionRecord,
    ValidationOutcome,
    check_bounds,
    check_relations,
    evaluate_triggers,
    validate_submission,
)

__all__ = [
    "BehaviorRule",
    "BoundFinding",
    "Descrip",
    "MedComp",
    "Part",
    "PatientProfile",
    "ProfileDiagnostic",
    "ProfileValidationError",
    "RelationConstraint",
    "RetrieveBinding",
    "StyleProperty",
    "SubmissionInput",
    "SubmissionRecord",
    "Template",
    "TemplateSet",
    "TriggerRule",
    "UiDocument",
    "ValidationOutcome",
    "ValueSpec",
    "XmlError",
    "check_bounds",
    "check_relations",
    "compile_profile",
    "derive_entity_key",
    "evaluate_triggers",
    "instantiate",
    "load_default_templates",
    "load_template",
    "load_template_dir",
    "lower_to_widget_tree",
    "parse_profile",
    "parse_ui",
    "serialize_profile",
    "serialize_ui",
    "substitution_context",
    "validate_profile",
    "validate_submission",
    "widget_tree_to_json",
]

__version__ = "0.1.0"
