"""cloudvault: a data-custody gateway over a local store that stands in for cloud storage."""

from .accounts import Account, AccountKind, AccountService, AccountState, AccountType, Role
from .authn import Authenticator, Identity, SessionToken
from .classification import ClassifiedData, Classifier, DataItem
from .config import Config, load_config
from .gateway import Gateway, Message, Outcome, PipelineState
from .levels import SensitivityLevel, dominates
from .monitoring import AuditCategory, AuditLog, SecurityControl, assessments_due, impact_analysis
from .risk import Channel, Decision, RiskPolicy, RiskVerdict, assess, scan_content
from .sealing import KeyRing, Profile, SealedRecord, open_record, seal, secure_data
from .store import LocalStore, MemoryStore
from .vault import Vault

__version__ = "0.1.0"

__all__ = [
    "Account", "AccountKind", "AccountService", "AccountState", "AccountType", "AuditCategory", "AuditLog",
    "Authenticator", "Channel", "ClassifiedData", "Classifier", "Config", "DataItem", "Decision", "Gateway",
    "Identity", "KeyRing", "LocalStore", "MemoryStore", "Message", "Outcome", "PipelineState", "Profile",
    "RiskPolicy", "RiskVerdict", "Role", "SealedRecord", "SecurityControl", "SensitivityLevel", "SessionToken",
    "Vault", "assess", "assessments_due", "dominates", "impact_analysis", "load_config", "open_record",
    "scan_content", "seal", "secure_data",
]
