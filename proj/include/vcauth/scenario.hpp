#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vcauth/cheat.hpp"
#include "vcauth/protocol.hpp"

// Scripted protocol runs over an in-process loopback transport. A
// script is an ordered list of steps; the runner executes them against
// one Server and per-principal Clients, records a line-oriented
// transcript (no timestamps, no key material, so output is stable),
// and keeps every raw frame for inspection. Script mistakes (unknown
// principals, steps whose prerequisites were skipped) throw
// ScriptError; protocol rejections become verdicts in the transcript.

namespace vcauth {

class ScriptError : public std::runtime_error {
 public:
  explicit ScriptError(const std::string& what) : std::runtime_error(what) {}
};

struct StepRegister { PrincipalId who; };
struct StepProvision {
  BinaryImage secret;
  SchemeParams params;
  std::vector<PrincipalId> owners;
};
struct StepHandshake { PrincipalId who; };
struct StepRequestChannel { PrincipalId requester; PrincipalId peer; };
/// Replaces `who`'s outgoing share with a fake grid built from their
/// genuine share and the alteration mask.
struct StepCraftFakeShare { PrincipalId who; RegionMask alteration; };
/// Flips one pixel (row-major index) in `who`'s outgoing share copy.
struct StepTamperOwnShare { PrincipalId who; std::uint64_t pixel_index; };
struct StepSendShare { PrincipalId sender; PrincipalId receiver; };
/// Re-delivers the most recent client->server frame unchanged.
struct StepReplayLastRequest {};
struct StepIssueNotice { PrincipalId owner; PrincipalId receiver; };
/// Notice whose digest record is re-signed with a freshly generated
/// non-server key; the digest itself stays genuine.
struct StepForgeNotice { PrincipalId owner; PrincipalId receiver; };
struct StepVerify { PrincipalId receiver; };

using Step = std::variant<StepRegister, StepProvision, StepHandshake,
                          StepRequestChannel, StepCraftFakeShare,
                          StepTamperOwnShare, StepSendShare,
                          StepReplayLastRequest, StepIssueNotice,
                          StepForgeNotice, StepVerify>;

struct TranscriptEntry {
  std::string line;     // stable rendering, e.g. "MSG A->S CommRequest [accepted]"
  std::string detail;   // free-form, may mention decrypted views
  Verdict verdict = Verdict::Accepted;
  bool is_message = false;
};

struct ScenarioResult {
  std::vector<TranscriptEntry> transcript;
  Verdict final_verdict = Verdict::ProtocolError;
  std::optional<BinaryImage> reconstructed;
  std::optional<crypto::Digest> expected_digest;
  std::optional<crypto::Digest> computed_digest;
  // context the harness may want to check against
  std::optional<BinaryImage> secret;
  std::optional<ShareSet> shares;
  std::vector<Bytes> frames;  // every frame that crossed the transport

  std::string final_line() const {
    return final_verdict == Verdict::Accepted
               ? "RECONSTRUCTED OK"
               : "REJECTED: " + to_string(final_verdict);
  }
};

class ScenarioRunner {
 public:
  /// seed drives share generation and fake-grid randomness; key
  /// material stays on the secure RNG (it never shows in transcripts).
  explicit ScenarioRunner(std::uint64_t seed)
      : rng_(RandomSource::seeded(seed)),
        server_(PrincipalId("S"), crypto::generate_keypair()) {}

  ScenarioResult run(std::span<const Step> script) {
    for (const Step& step : script)
      std::visit([&](const auto& s) { execute(s); }, step);
    return std::move(result_);
  }

 private:
  void note(const std::string& line) {
    result_.transcript.push_back(TranscriptEntry{line, "", Verdict::Accepted,
                                                 false});
  }

  void message(const PrincipalId& from, const PrincipalId& to,
               wire::MessageType type, Verdict verdict,
               const std::string& detail) {
    TranscriptEntry entry;
    entry.line = "MSG " + from.name() + "->" + to.name() + " " +
                 wire::to_string(type) + " [" + to_string(verdict) + "]";
    entry.detail = detail;
    entry.verdict = verdict;
    entry.is_message = true;
    result_.transcript.push_back(std::move(entry));
    if (verdict != Verdict::Accepted) result_.final_verdict = verdict;
  }

  Client& client(const PrincipalId& who) {
    auto it = clients_.find(who);
    if (it == clients_.end())
      throw ScriptError("script references unregistered principal: " +
                        who.name());
    return it->second;
  }

  struct ServerReply {
    Bytes bytes;
    wire::MessageType type = wire::MessageType::Error;
    Verdict verdict = Verdict::Accepted;
    std::string detail;
  };

  /// Deliver a frame to the server and record the request direction;
  /// its verdict is the server's acceptance (an error-frame reply means
  /// the request was rejected). The caller records the reply direction
  /// once the client has processed it.
  ServerReply deliver_to_server(const PrincipalId& from, const Bytes& frame,
                                wire::MessageType sent_type) {
    result_.frames.push_back(frame);
    ServerReply reply;
    reply.bytes = server_.handle_frame(from, frame);
    result_.frames.push_back(reply.bytes);
    auto decoded = wire::decode_frame(reply.bytes);
    if (auto* f = std::get_if<wire::Frame>(&decoded)) {
      reply.type = f->type;
      if (f->type == wire::MessageType::Error) {
        wire::WireError err = wire::parse_error_frame(*f);
        reply.verdict = verdict_for_error_code(err.code);
        reply.detail = err.detail;
      }
    }
    message(from, server_.id(), sent_type, reply.verdict, reply.detail);
    return reply;
  }

  void execute(const StepRegister& step) {
    if (clients_.count(step.who))
      throw ScriptError("duplicate registration: " + step.who.name());
    crypto::KeyPair keys = crypto::generate_keypair();
    server_.register_principal(step.who, keys.pub);
    clients_.emplace(step.who, Client(step.who, keys, server_.id(),
                                      server_.public_key()));
    note("-- register " + step.who.name());
  }

  void execute(const StepProvision& step) {
    for (const PrincipalId& owner : step.owners) client(owner);
    std::vector<Server::Provisioned> deliveries =
        server_.provision(step.secret, step.params, step.owners, rng_);
    for (Server::Provisioned& d : deliveries)
      client(d.owner).adopt_share(d.share, d.share_index, d.record);
    result_.secret = step.secret;
    result_.shares = server_.provisioned_shares();
    std::string owners;
    for (const PrincipalId& o : step.owners)
      owners += (owners.empty() ? "" : ",") + o.name();
    note("-- provision scheme=" + to_string(step.params.kind) +
         " n=" + std::to_string(step.params.n) + " owners=" + owners);
  }

  void execute(const StepHandshake& step) {
    Client& c = client(step.who);
    Bytes init = wrap_logic(step.who, [&] { return c.make_handshake_init(); });
    ServerReply reply = deliver_to_server(step.who, init,
                                          wire::MessageType::HandshakeInit);
    Receipt receipt = c.process_handshake_ack(reply.bytes);
    message(server_.id(), step.who, reply.type, receipt.verdict,
            receipt.detail);
  }

  void execute(const StepRequestChannel& step) {
    Client& c = client(step.requester);
    client(step.peer);
    Bytes request = wrap_logic(step.requester,
                               [&] { return c.make_comm_request(step.peer); });
    last_request_ = request;
    last_request_sender_ = step.requester;
    ServerReply reply = deliver_to_server(step.requester, request,
                                          wire::MessageType::CommRequest);
    Receipt receipt = c.process_comm_grant(reply.bytes);
    message(server_.id(), step.requester, reply.type, receipt.verdict,
            receipt.detail);
  }

  void execute(const StepCraftFakeShare& step) {
    Client& c = client(step.who);
    if (!result_.secret)
      throw ScriptError("craft-fake before provision");
    if (!c.own_share())
      throw ScriptError("craft-fake: " + step.who.name() + " holds no share");
    FakeImageSpec spec{step.alteration};
    BinaryImage fake_secret = make_fake_secret(*result_.secret, spec);
    BinaryImage fg = fake_grid(*result_.secret, fake_secret, *c.own_share(),
                               rng_);
    c.override_outgoing_share(canonical_p4(fg));
    note("-- " + step.who.name() + " crafts fake grid (" +
         std::to_string(step.alteration.count_selected()) +
         " px altered)");
  }

  void execute(const StepTamperOwnShare& step) {
    Client& c = client(step.who);
    if (!c.own_share())
      throw ScriptError("tamper: " + step.who.name() + " holds no share");
    BinaryImage copy = *c.own_share();
    std::uint32_t row =
        static_cast<std::uint32_t>(step.pixel_index / copy.width());
    std::uint32_t col =
        static_cast<std::uint32_t>(step.pixel_index % copy.width());
    if (row >= copy.height())
      throw ScriptError("tamper: pixel index out of range");
    copy.set(row, col, 1 - copy.get(row, col));
    c.override_outgoing_share(canonical_p4(copy));
    note("-- " + step.who.name() + " flips share pixel " +
         std::to_string(step.pixel_index));
  }

  void execute(const StepSendShare& step) {
    Client& sender = client(step.sender);
    Client& receiver = client(step.receiver);
    Bytes frame = wrap_logic(step.sender, [&] {
      return sender.make_share_transfer(step.receiver);
    });
    result_.frames.push_back(frame);
    Receipt receipt = receiver.process_share_transfer(frame);
    message(step.sender, step.receiver, wire::MessageType::ShareTransfer,
            receipt.verdict, receipt.detail);
  }

  void execute(const StepReplayLastRequest&) {
    if (last_request_.empty() || !last_request_sender_)
      throw ScriptError("replay: no prior request to replay");
    note("-- network replays last CommRequest from " +
         last_request_sender_->name());
    ServerReply reply = deliver_to_server(*last_request_sender_, last_request_,
                                          wire::MessageType::CommRequest);
    message(server_.id(), *last_request_sender_, reply.type, reply.verdict,
            reply.detail);
  }

  void execute(const StepIssueNotice& step) {
    client(step.receiver);
    Bytes frame;
    try {
      frame = server_.make_digest_notice(step.owner, step.receiver);
    } catch (const std::invalid_argument& e) {
      throw ScriptError(std::string("issue-notice: ") + e.what());
    }
    result_.frames.push_back(frame);
    Receipt receipt = client(step.receiver).process_digest_notice(frame);
    message(server_.id(), step.receiver, wire::MessageType::DigestNotice,
            receipt.verdict, receipt.detail);
  }

  void execute(const StepForgeNotice& step) {
    client(step.receiver);
    auto records = server_.digest_records();
    auto it = records.find(step.owner);
    if (it == records.end())
      throw ScriptError("forge-notice: no digest record for " +
                        step.owner.name());
    DigestRecord record = it->second;
    crypto::KeyPair rogue = crypto::generate_keypair();
    record.server_sig = crypto::sign(
        rogue.sec,
        digest_record_signing_input(server_.id(), record.owner,
                                    record.share_index, record.digest));
    note("-- digest notice re-signed with a non-server key");
    Bytes frame;
    try {
      frame = server_.make_digest_notice_with_record(step.owner,
                                                     step.receiver, record);
    } catch (const std::invalid_argument& e) {
      throw ScriptError(std::string("forge-notice: ") + e.what());
    }
    result_.frames.push_back(frame);
    Receipt receipt = client(step.receiver).process_digest_notice(frame);
    message(server_.id(), step.receiver, wire::MessageType::DigestNotice,
            receipt.verdict, receipt.detail);
  }

  void execute(const StepVerify& step) {
    Client& c = client(step.receiver);
    ReconstructOutcome outcome = c.verify_and_reconstruct();
    TranscriptEntry entry;
    entry.line = "VERIFY " + step.receiver.name() + " [" +
                 to_string(outcome.verdict) + "]";
    entry.detail = outcome.detail;
    entry.verdict = outcome.verdict;
    result_.transcript.push_back(entry);
    result_.final_verdict = outcome.verdict;
    result_.reconstructed = outcome.image;
    result_.expected_digest = outcome.expected_digest;
    result_.computed_digest = outcome.computed_digest;
  }

  template <typename F>
  Bytes wrap_logic(const PrincipalId& who, F&& f) {
    try {
      return f();
    } catch (const std::logic_error& e) {
      throw ScriptError("step for " + who.name() +
                        " out of order: " + e.what());
    }
  }

  RandomSource rng_;
  Server server_;
  std::map<PrincipalId, Client> clients_;
  Bytes last_request_;
  std::optional<PrincipalId> last_request_sender_;
  ScenarioResult result_;
};

inline ScenarioResult run_scenario(std::span<const Step> script,
                                   std::uint64_t seed) {
  ScenarioRunner runner(seed);
  return runner.run(script);
}

// ---------------------------------------------------------------------------
// Built-in scenarios

enum class ScenarioKind { Honest, Attack, Replay, Forge };

inline std::optional<ScenarioKind> parse_scenario_kind(const std::string& s) {
  if (s == "honest") return ScenarioKind::Honest;
  if (s == "attack") return ScenarioKind::Attack;
  if (s == "replay") return ScenarioKind::Replay;
  if (s == "forge") return ScenarioKind::Forge;
  return std::nullopt;
}

inline Verdict expected_verdict(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Honest: return Verdict::Accepted;
    case ScenarioKind::Attack: return Verdict::DigestMismatch;
    case ScenarioKind::Replay: return Verdict::Replay;
    case ScenarioKind::Forge: return Verdict::BadSignature;
  }
  return Verdict::ProtocolError;
}

/// Top half white, bottom half black; the stock scenario secret.
inline BinaryImage half_black_secret(std::uint32_t width,
                                     std::uint32_t height) {
  BinaryImage img(width, height);
  for (std::uint32_t r = height / 2; r < height; ++r)
    for (std::uint32_t c = 0; c < width; ++c) img.set(r, c, 1);
  return img;
}

struct ScenarioConfig {
  std::uint32_t width = 64;
  std::uint32_t height = 64;
};

/// A hands a genuine share to B; C holds the third share.
inline std::vector<Step> honest_script(const ScenarioConfig& cfg = {}) {
  PrincipalId a("A"), b("B"), c("C");
  BinaryImage secret = half_black_secret(cfg.width, cfg.height);
  SchemeParams params = SchemeParams::two_of_n(3, cfg.width, cfg.height);
  return {
      StepRegister{a}, StepRegister{b}, StepRegister{c},
      StepProvision{secret, params, {a, b, c}},
      StepHandshake{a}, StepHandshake{b},
      StepRequestChannel{a, b},
      StepSendShare{a, b},
      StepIssueNotice{a, b},
      StepVerify{b},
  };
}

/// A and B collude against C: A sends a fake grid carrying an altered
/// image. The digest check exposes it.
inline std::vector<Step> attack_script(const ScenarioConfig& cfg = {}) {
  PrincipalId a("A"), b("B"), c("C");
  BinaryImage secret = half_black_secret(cfg.width, cfg.height);
  SchemeParams params = SchemeParams::two_of_n(3, cfg.width, cfg.height);
  RegionMask mask(cfg.width, cfg.height);
  // a 16x16 block inside the white half
  for (std::uint32_t r = 8; r < 24 && r < cfg.height / 2; ++r)
    for (std::uint32_t col = 8; col < 24 && col < cfg.width; ++col)
      mask.set(r, col, true);
  return {
      StepRegister{a}, StepRegister{b}, StepRegister{c},
      StepProvision{secret, params, {a, b, c}},
      StepCraftFakeShare{a, mask},
      StepHandshake{a}, StepHandshake{c},
      StepRequestChannel{a, c},
      StepSendShare{a, c},
      StepIssueNotice{a, c},
      StepVerify{c},
  };
}

/// The network re-delivers A's CommRequest; the nonce window catches it.
inline std::vector<Step> replay_script(const ScenarioConfig& cfg = {}) {
  PrincipalId a("A"), b("B");
  BinaryImage secret = half_black_secret(cfg.width, cfg.height);
  SchemeParams params = SchemeParams::two_of_n(2, cfg.width, cfg.height);
  return {
      StepRegister{a}, StepRegister{b},
      StepProvision{secret, params, {a, b}},
      StepHandshake{a},
      StepRequestChannel{a, b},
      StepReplayLastRequest{},
  };
}

/// Genuine share, genuine digest, but the record is signed by a
/// non-server key; rejected before any digest comparison.
inline std::vector<Step> forge_script(const ScenarioConfig& cfg = {}) {
  PrincipalId a("A"), b("B");
  BinaryImage secret = half_black_secret(cfg.width, cfg.height);
  SchemeParams params = SchemeParams::two_of_n(2, cfg.width, cfg.height);
  return {
      StepRegister{a}, StepRegister{b},
      StepProvision{secret, params, {a, b}},
      StepHandshake{a}, StepHandshake{b},
      StepRequestChannel{a, b},
      StepSendShare{a, b},
      StepForgeNotice{a, b},
      StepVerify{b},
  };
}

/// Honest flow except the sender flips one pixel before sending.
inline std::vector<Step> tamper_script(std::uint64_t pixel_index,
                                       const ScenarioConfig& cfg = {}) {
  PrincipalId a("A"), b("B");
  BinaryImage secret = half_black_secret(cfg.width, cfg.height);
  SchemeParams params = SchemeParams::two_of_n(2, cfg.width, cfg.height);
  return {
      StepRegister{a}, StepRegister{b},
      StepProvision{secret, params, {a, b}},
      StepHandshake{a}, StepHandshake{b},
      StepRequestChannel{a, b},
      StepTamperOwnShare{a, pixel_index},
      StepSendShare{a, b},
      StepIssueNotice{a, b},
      StepVerify{b},
  };
}

inline std::vector<Step> builtin_script(ScenarioKind kind,
                                        const ScenarioConfig& cfg = {}) {
  switch (kind) {
    case ScenarioKind::Honest: return honest_script(cfg);
    case ScenarioKind::Attack: return attack_script(cfg);
    case ScenarioKind::Replay: return replay_script(cfg);
    case ScenarioKind::Forge: return forge_script(cfg);
  }
  throw std::invalid_argument("unknown scenario kind");
}

}  // namespace vcauth
