#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace promptdag {

// Base class for everything thrown by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// ---- graph construction / mutation ----

class DuplicateIdError : public Error {
public:
    explicit DuplicateIdError(const std::string& id)
        : Error("duplicate node id: " + id), id_(id) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

class UnknownDependencyError : public Error {
public:
    UnknownDependencyError(const std::string& node, const std::string& dep)
        : Error("node '" + node + "' depends on unknown node '" + dep + "'"),
          node_(node), dep_(dep) {}
    const std::string& node() const { return node_; }
    const std::string& dep() const { return dep_; }

private:
    std::string node_;
    std::string dep_;
};

// Carries the offending cycle rendered as "a -> b -> a".
class CycleError : public Error {
public:
    explicit CycleError(const std::string& cycle_path)
        : Error("cycle introduced: " + cycle_path), cycle_path_(cycle_path) {}
    const std::string& cycle_path() const { return cycle_path_; }

private:
    std::string cycle_path_;
};

class GraphStateError : public Error {
public:
    explicit GraphStateError(const std::string& what) : Error(what) {}
};

// Frontier drained with unevaluated nodes left over. Unreachable unless the
// in-degree bookkeeping is broken.
class StalledTraversalError : public Error {
public:
    explicit StalledTraversalError(const std::string& what) : Error(what) {}
};

// ---- templates / database ----

class UnresolvedTemplateKeyError : public Error {
public:
    explicit UnresolvedTemplateKeyError(const std::string& path)
        : Error("unresolved template key: $db." + path + "$"), path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

class StorageError : public Error {
public:
    explicit StorageError(const std::string& what) : Error(what) {}
};

class CorruptTraceError : public Error {
public:
    explicit CorruptTraceError(const std::string& what) : Error(what) {}
};

// ---- node evaluation ----

// Raised by an after-query hook when the model answer fails its contract.
// The message is fed back to the model on the corrective retry turn.
class AfterQueryRetry : public Error {
public:
    explicit AfterQueryRetry(const std::string& message_for_model)
        : Error(message_for_model) {}
};

class AfterQueryExhaustedError : public Error {
public:
    AfterQueryExhaustedError(const std::string& node, const std::string& last_message)
        : Error("node '" + node + "' exhausted after-query retries: " + last_message),
          node_(node), last_message_(last_message) {}
    const std::string& node() const { return node_; }
    const std::string& last_message() const { return last_message_; }

private:
    std::string node_;
    std::string last_message_;
};

class UnknownHookError : public Error {
public:
    explicit UnknownHookError(const std::string& id)
        : Error("unknown hook id: " + id), id_(id) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

// ---- parsing ----

class NoBlockFoundError : public Error {
public:
    explicit NoBlockFoundError(const std::string& what) : Error(what) {}
};

class ShapeMismatchError : public Error {
public:
    explicit ShapeMismatchError(const std::string& detail) : Error(detail) {}
};

// ---- backend ----

class BackendError : public Error {
public:
    BackendError(int status, const std::string& body)
        : Error("backend error " + std::to_string(status) + ": " + body),
          status_(status), body_(body) {}
    int status() const { return status_; }
    const std::string& body() const { return body_; }

private:
    int status_;
    std::string body_;
};

class TimeoutError : public Error {
public:
    explicit TimeoutError(const std::string& what) : Error(what) {}
};

class MissingCredentialsError : public Error {
public:
    explicit MissingCredentialsError(const std::string& env_var)
        : Error("missing credentials: environment variable " + env_var + " not set") {}
};

class ScriptError : public Error {
public:
    explicit ScriptError(const std::string& what) : Error(what) {}
};

class UnknownModelRateError : public Error {
public:
    explicit UnknownModelRateError(const std::string& model)
        : Error("no price entry for model: " + model), model_(model) {}
    const std::string& model() const { return model_; }

private:
    std::string model_;
};

// ---- agent patterns ----

class SchemaViolationError : public Error {
public:
    explicit SchemaViolationError(const std::string& what) : Error(what) {}
};

class UnparseableAnswerError : public Error {
public:
    explicit UnparseableAnswerError(const std::string& what) : Error(what) {}
};

class MisconfiguredNodeSetError : public Error {
public:
    explicit MisconfiguredNodeSetError(const std::string& node)
        : Error("configured node set names absent node: " + node) {}
};

class UnknownSkillError : public Error {
public:
    explicit UnknownSkillError(const std::string& skill)
        : Error("unknown skill: " + skill), skill_(skill) {}
    const std::string& skill() const { return skill_; }

private:
    std::string skill_;
};

class UnknownActionError : public Error {
public:
    explicit UnknownActionError(const std::string& action)
        : Error("unknown action: " + action), action_(action) {}
    const std::string& action() const { return action_; }

private:
    std::string action_;
};

class NonPositiveRepeatsError : public Error {
public:
    explicit NonPositiveRepeatsError(long repeats)
        : Error("repeats must be >= 1, got " + std::to_string(repeats)) {}
};

class EnvironmentError : public Error {
public:
    explicit EnvironmentError(const std::string& what) : Error(what) {}
};

}  // namespace promptdag
