#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace schemacoder {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class MismatchError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class RuleError : public Error {
public:
    RuleError(std::string rule_id, const std::string& reason)
        : Error("rule '" + rule_id + "': " + reason), rule_id_(std::move(rule_id)), reason_(reason) {}

    const std::string& rule_id() const { return rule_id_; }
    const std::string& reason() const { return reason_; }

private:
    std::string rule_id_;
    std::string reason_;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

class DegenerateError : public Error {
public:
    using Error::Error;
};

class UniverseMismatch : public Error {
public:
    using Error::Error;
};

enum class BackendFault { transient, fatal, budget_exceeded };

class BackendError : public Error {
public:
    BackendError(BackendFault fault, std::string purpose, const std::string& message)
        : Error(message), fault_(fault), purpose_(std::move(purpose)) {}

    BackendFault fault() const { return fault_; }
    const std::string& purpose() const { return purpose_; }

private:
    BackendFault fault_;
    std::string purpose_;
};

}  // namespace schemacoder
