"""Wire constants: tags, command codes, response codes, algorithm ids."""

TPM_ST_NO_SESSIONS = 0x8001
TPM_ST_SESSIONS = 0x8002

TPM_SU_CLEAR = 0x0000
TPM_SU_STATE = 0x0001

TPM_RH_OWNER = 0x40000001
TPM_RS_PW = 0x40000009
HR_TRANSIENT = 0x80000000

HEADER_SIZE = 10
MAX_COMMAND_SIZE = 4096
MAX_RESPONSE_SIZE = 4096

# standard TPM 2.0 command codes
TPM_CC_CREATE_PRIMARY = 0x00000131
TPM_CC_STARTUP = 0x00000144
TPM_CC_SHUTDOWN = 0x00000145
TPM_CC_CREATE = 0x00000153
TPM_CC_LOAD = 0x00000157
TPM_CC_SIGN = 0x0000015D
TPM_CC_FLUSH_CONTEXT = 0x00000165
TPM_CC_VERIFY_SIGNATURE = 0x00000177

# vendor-defined codes for the post-quantum commands
TPM_CC_KYBER_ENCRYPT = 0x20000001
TPM_CC_KYBER_DECRYPT = 0x20000002
TPM_CC_KYBER_ENC = 0x20000003
TPM_CC_KYBER_DEC = 0x20000004
TPM_CC_ROT_MSG1 = 0x20000011
TPM_CC_ROT_MSG2 = 0x20000012
TPM_CC_ROT_MSG3 = 0x20000013
TPM_CC_ROT_MSG4 = 0x20000014

COMMAND_NAMES = {
    TPM_CC_CREATE_PRIMARY: "TPM_CC_CreatePrimary",
    TPM_CC_STARTUP: "TPM_CC_Startup",
    TPM_CC_SHUTDOWN: "TPM_CC_Shutdown",
    TPM_CC_CREATE: "TPM_CC_Create",
    TPM_CC_LOAD: "TPM_CC_Load",
    TPM_CC_SIGN: "TPM_CC_Sign",
    TPM_CC_FLUSH_CONTEXT: "TPM_CC_FlushContext",
    TPM_CC_VERIFY_SIGNATURE: "TPM_CC_VerifySignature",
    TPM_CC_KYBER_ENCRYPT: "TPM_CC_KYBER_Encrypt",
    TPM_CC_KYBER_DECRYPT: "TPM_CC_KYBER_Decrypt",
    TPM_CC_KYBER_ENC: "TPM_CC_KYBER_Enc",
    TPM_CC_KYBER_DEC: "TPM_CC_KYBER_Dec",
    TPM_CC_ROT_MSG1: "TPM_CC_ROT_MSG1",
    TPM_CC_ROT_MSG2: "TPM_CC_ROT_MSG2",
    TPM_CC_ROT_MSG3: "TPM_CC_ROT_MSG3",
    TPM_CC_ROT_MSG4: "TPM_CC_ROT_MSG4",
}

# response codes
TPM_RC_SUCCESS = 0x000
TPM_RC_BAD_TAG = 0x01E
TPM_RC_ATTRIBUTES = 0x082
TPM_RC_VALUE = 0x084
TPM_RC_TYPE = 0x08A
TPM_RC_SIZE = 0x095
TPM_RC_SIGNATURE = 0x09B
TPM_RC_INTEGRITY = 0x09F
TPM_RC_BINDING = 0x0A5
TPM_RC_KEY = 0x0C9
TPM_RC_INITIALIZE = 0x100
TPM_RC_FAILURE = 0x101
TPM_RC_SEQUENCE = 0x103
TPM_RC_AUTH_MISSING = 0x125
TPM_RC_COMMAND_CODE = 0x143
TPM_RC_AUTH_CONTEXT = 0x145
TPM_RC_NV_SPACE = 0x14B
TPM_RC_HANDLE = 0x18B
TPM_RC_AUTH_FAIL = 0x98E
TPM_RC_OBJECT_MEMORY = 0x902
TPM_RC_SESSION_MEMORY = 0x903

RC_NAMES = {
    TPM_RC_SUCCESS: "TPM_RC_SUCCESS",
    TPM_RC_BAD_TAG: "TPM_RC_BAD_TAG",
    TPM_RC_ATTRIBUTES: "TPM_RC_ATTRIBUTES",
    TPM_RC_VALUE: "TPM_RC_VALUE",
    TPM_RC_TYPE: "TPM_RC_TYPE",
    TPM_RC_SIZE: "TPM_RC_SIZE",
    TPM_RC_SIGNATURE: "TPM_RC_SIGNATURE",
    TPM_RC_INTEGRITY: "TPM_RC_INTEGRITY",
    TPM_RC_BINDING: "TPM_RC_BINDING",
    TPM_RC_KEY: "TPM_RC_KEY",
    TPM_RC_INITIALIZE: "TPM_RC_INITIALIZE",
    TPM_RC_FAILURE: "TPM_RC_FAILURE",
    TPM_RC_SEQUENCE: "TPM_RC_SEQUENCE",
    TPM_RC_AUTH_MISSING: "TPM_RC_AUTH_MISSING",
    TPM_RC_COMMAND_CODE: "TPM_RC_COMMAND_CODE",
    TPM_RC_AUTH_CONTEXT: "TPM_RC_AUTH_CONTEXT",
    TPM_RC_NV_SPACE: "TPM_RC_NV_SPACE",
    TPM_RC_HANDLE: "TPM_RC_HANDLE",
    TPM_RC_AUTH_FAIL: "TPM_RC_AUTH_FAIL",
    TPM_RC_OBJECT_MEMORY: "TPM_RC_OBJECT_MEMORY",
    TPM_RC_SESSION_MEMORY: "TPM_RC_SESSION_MEMORY",
}


def rc_name(rc: int) -> str:
    return RC_NAMES.get(rc, f"TPM_RC_0x{rc:03X}")


# algorithm identifiers (vendor range)
TPM_ALG_KYBER768 = 0x00A0
TPM_ALG_DILITHIUM3 = 0x00A1

ALG_NAMES = {TPM_ALG_KYBER768: "KYBER768", TPM_ALG_DILITHIUM3: "DILITHIUM3"}

# TPMA_OBJECT bits
TPMA_OBJECT_FIXEDTPM = 0x00000002
TPMA_OBJECT_FIXEDPARENT = 0x00000010
TPMA_OBJECT_USERWITHAUTH = 0x00000040
TPMA_OBJECT_RESTRICTED = 0x00010000
TPMA_OBJECT_DECRYPT = 0x00020000
TPMA_OBJECT_SIGN = 0x00040000
