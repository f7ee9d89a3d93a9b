"""Stable machine-readable error codes shared by the core modules and the API.

Every failure that crosses the API boundary is one of these classes; the
gateway serializes them as ``{"code": ..., "message": ...}`` with the class's
HTTP status. The set of codes is frozen by a test, so adding a class here
means updating the documented list in the README as well.
"""

from __future__ import annotations

# code -> exception class, populated as subclasses are defined
ERROR_CODES: dict[str, type["ApiError"]] = {}


class ApiError(Exception):
    code = "internal-error"
    http_status = 500

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        ERROR_CODES[cls.code] = cls


ERROR_CODES[ApiError.code] = ApiError


class BadCredentials(ApiError):
    code = "bad-credentials"
    http_status = 401


class Unauthorized(ApiError):
    code = "unauthorized"
    http_status = 401


class NotAuthorized(ApiError):
    code = "not-authorized"
    http_status = 403


class NotFound(ApiError):
    code = "not-found"
    http_status = 404


class DuplicateName(ApiError):
    code = "duplicate-name"
    http_status = 409


class EmptyName(ApiError):
    code = "empty-name"
    http_status = 400


class EmptyArtifact(ApiError):
    code = "empty-artifact"
    http_status = 400


class InvalidPolicy(ApiError):
    code = "invalid-policy"
    http_status = 400


class StorageFailure(ApiError):
    code = "storage-failure"
    http_status = 500


class InvalidRange(ApiError):
    code = "invalid-range"
    http_status = 400


class InvalidBucket(ApiError):
    code = "invalid-bucket"
    http_status = 400


class InvalidSpec(ApiError):
    code = "invalid-spec"
    http_status = 400


class UnknownRuntime(ApiError):
    code = "unknown-runtime"
    http_status = 400


class DatasetExpired(ApiError):
    code = "dataset-expired"
    http_status = 400


class AlreadyTerminal(ApiError):
    code = "already-terminal"
    http_status = 409


class ResultMissing(ApiError):
    code = "result-missing"
    http_status = 404


class ResultMalformed(ApiError):
    code = "result-malformed"
    http_status = 400


class ScoreOutOfRange(ApiError):
    code = "score-out-of-range"
    http_status = 400


class DuplicateBinding(ApiError):
    code = "duplicate-binding"
    http_status = 409


class InvalidWeight(ApiError):
    code = "invalid-weight"
    http_status = 400


class EmptyBody(ApiError):
    code = "empty-body"
    http_status = 400


class BodyTooLarge(ApiError):
    code = "body-too-large"
    http_status = 413


class InvalidLimit(ApiError):
    code = "invalid-limit"
    http_status = 400


class InvalidRequest(ApiError):
    """Request body or query parameters failed validation before dispatch."""

    code = "invalid-request"
    http_status = 400


class UnknownRoute(ApiError):
    code = "unknown-route"
    http_status = 404


class MethodNotAllowed(ApiError):
    code = "method-not-allowed"
    http_status = 405


class ConfigInvalid(ApiError):
    code = "config-invalid"
    http_status = 500


class BindFailure(ApiError):
    code = "bind-failure"
    http_status = 500


class StorageCorrupt(ApiError):
    code = "storage-corrupt"
    http_status = 500
