#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <filesystem>
#include <fstream>

#include <httplib.h>

#include "iglu/net.hpp"
#include "oracles.hpp"

using namespace iglu;
using namespace iglu::net;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

session::Task three_block_task() {
  session::Task t;
  t.id = "three";
  t.target.set({1, 0, 0}, 50);
  t.target.set({2, 0, 0}, 50);
  t.target.set({1, 1, 0}, 57);
  return t;
}

/// Reads until a message of `type` (or an event envelope when type is
/// "event") arrives; everything skipped is kept in `seen`.
json await(LineStream& s, const std::string& type, std::vector<json>* seen = nullptr) {
  const auto deadline = std::chrono::steady_clock::now() + 5s;
  while (std::chrono::steady_clock::now() < deadline) {
    auto m = s.receive(200ms);
    if (!m) continue;
    if (seen) seen->push_back(*m);
    if (type == "event" ? protocol::is_event_message(*m) : m->value("type", "") == type) return *m;
  }
  throw std::runtime_error("timed out waiting for " + type);
}

class NetTest : public ::testing::Test {
 protected:
  NetTest()
      : game(config(), std::make_shared<MemoryStorage>()),
        wire(game, "127.0.0.1", 0),
        admin(game, "127.0.0.1", 0, web_root().string()) {
    game.add_task(three_block_task());
    wire.start();
    admin.start();
  }
  ~NetTest() override {
    wire.stop();
    admin.stop();
  }

  static ServerConfig config() {
    ServerConfig c;
    c.collection_mode = true;
    return c;
  }

  static std::filesystem::path web_root() {
    const auto dir = std::filesystem::temp_directory_path() / "iglu_test_web";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "index.html") << "<html>lobby</html>";
    return dir;
  }

  std::unique_ptr<LineStream> hello(const json& m) {
    auto s = LineStream::connect("127.0.0.1", wire.port());
    s->send(m);
    const auto w = await(*s, "welcome");
    EXPECT_EQ(w.at("role"), m.at("role"));
    return s;
  }

  server::GameServer game;
  WireServer wire;
  AdminServer admin;
};

}  // namespace

TEST_F(NetTest, GameOverTheWire) {
  auto bot = hello({{"type", "hello"}, {"role", "agent"}, {"agentId", "bot"}});
  auto human = hello({{"type", "hello"}, {"role", "human"}, {"humanId", "alice"}});
  AdminClient client("127.0.0.1", admin.port());
  const auto code = client.post("/join-codes", {{"agentId", "bot"}, {"taskId", "three"}}).at("joinCode");

  human->send({{"type", "join"}, {"code", code}});
  const auto joined = await(*human, "joined");
  const std::string sid = joined.at("sessionId");
  EXPECT_EQ(joined.at("task").at("id"), "three");
  EXPECT_EQ(await(*bot, "session_start").at("sessionId"), sid);

  human->send({{"type", "submit"}, {"ref", 1}, {"sessionId", sid}, {"event", {{"kind", "ChatMessage"}, {"role", "architect"}, {"text", "go"}}}});
  EXPECT_EQ(await(*human, "ack").at("ref"), 1);
  human->send({{"type", "submit"}, {"ref", 2}, {"sessionId", sid}, {"event", {{"kind", "TurnEnded"}, {"role", "architect"}}}});
  EXPECT_EQ(await(*human, "ack").at("phase"), "BuilderTurn");

  for (const auto& [x, y, id] : std::vector<std::tuple<int, int, int>>{{1, 63, 50}, {2, 63, 50}, {1, 64, 57}}) {
    bot->send({{"type", "submit"}, {"sessionId", sid}, {"event", {{"kind", "BlockPlaced"}, {"at", {x, y, 0}}, {"blockId", id}}}});
    await(*bot, "ack");
  }
  bot->send({{"type", "submit"}, {"ref", "r"}, {"sessionId", sid}, {"event", {{"kind", "BlockPlaced"}, {"at", {1, 63, 0}}, {"blockId", 50}}}});
  EXPECT_EQ(await(*bot, "reject").at("code"), "RuleViolation");
  bot->send({{"type", "submit"}, {"sessionId", sid}, {"event", {{"kind", "TurnEnded"}, {"role", "builder"}}}});
  await(*bot, "ack");

  human->send({{"type", "submit"}, {"sessionId", sid}, {"event", {{"kind", "GameEnded"}, {"success", true}}}});
  const auto completion = await(*human, "completion");
  await(*bot, "session_end");

  const auto log = client.get("/logs/" + completion.at("code").get<std::string>());
  std::vector<protocol::GameEvent> events;
  for (const auto& e : log.at("events")) events.push_back(protocol::game_event_from_json(e));
  EXPECT_FALSE(session::audit_log(events));
  EXPECT_EQ(session::replay_log(three_block_task(), events).grid, three_block_task().target);

  while (human->receive(200ms)) {
  }
  std::vector<json> replayed;
  human->send({{"type", "resync"}, {"sessionId", sid}, {"fromSeq", 0}});
  await(*human, "resync_done", &replayed);
  EXPECT_EQ(replayed.size(), events.size() + 1);
}

TEST_F(NetTest, WireErrors) {
  auto s = LineStream::connect("127.0.0.1", wire.port());
  s->send({{"type", "submit"}, {"ref", 1}});
  EXPECT_EQ(await(*s, "reject").at("code"), "InvalidRequest");
  s->send({{"type", "ping"}, {"ref", 2}});
  EXPECT_EQ(await(*s, "pong").at("ref"), 2);

  auto first = hello({{"type", "hello"}, {"role", "agent"}, {"agentId", "dup"}});
  auto second = LineStream::connect("127.0.0.1", wire.port());
  second->send({{"type", "hello"}, {"role", "agent"}, {"agentId", "dup"}});
  EXPECT_EQ(await(*second, "error").at("code"), "DuplicateAgentId");

  auto human = hello({{"type", "hello"}, {"role", "human"}});
  human->send({{"type", "join"}, {"ref", 3}, {"code", "nope"}});
  EXPECT_EQ(await(*human, "reject").at("code"), "InvalidCode");
}

TEST_F(NetTest, AgentDropSealsItsSession) {
  auto bot = hello({{"type", "hello"}, {"role", "agent"}, {"agentId", "bot"}});
  auto human = hello({{"type", "hello"}, {"role", "human"}});
  human->send({{"type", "join"}, {"code", game.mint_join_code("bot", "three")}});
  await(*human, "joined");
  bot->close();
  EXPECT_EQ(await(*human, "completion").at("success"), false);
}

TEST_F(NetTest, BrowsersSpeakTheSameProtocolOverWebSocket) {
  namespace beast = boost::beast;
  boost::asio::io_context io;
  boost::asio::ip::tcp::resolver resolver(io);
  beast::websocket::stream<boost::asio::ip::tcp::socket> ws(io);
  boost::asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(wire.port())));
  ws.handshake("127.0.0.1", "/");
  ws.text(true);
  ws.write(boost::asio::buffer(json{{"type", "hello"}, {"role", "human"}, {"humanId", "web"}}.dump()));
  beast::flat_buffer buffer;
  ws.read(buffer);
  const auto reply = json::parse(beast::buffers_to_string(buffer.data()));
  EXPECT_EQ(reply.at("type"), "welcome");
  EXPECT_EQ(reply.at("id"), "web");
  ws.close(beast::websocket::close_code::normal);
}

TEST_F(NetTest, AdminApi) {
  AdminClient client("127.0.0.1", admin.port());
  EXPECT_EQ(client.get("/health").at("ok"), true);
  EXPECT_EQ(client.get("/tasks").size(), 1u);
  const auto added = client.post("/tasks", session::to_json(three_block_task()));
  EXPECT_EQ(added.at("ids"), json::array({"three"}));

  auto expect_status = [&](auto&& call, int status, const std::string& code) {
    try {
      call();
      ADD_FAILURE() << "expected " << code;
    } catch (const AdminError& e) {
      EXPECT_EQ(e.status(), status);
      EXPECT_EQ(e.code(), code);
    }
  };
  expect_status([&] { client.post("/join-codes", {{"agentId", "ghost"}, {"taskId", "three"}}); }, 404, "UnknownAgent");
  expect_status([&] { client.get("/logs/nothing"); }, 404, "UnknownCompletionCode");
  expect_status([&] { client.post("/collection/submit", {{"leaseId", "x"}}); }, 404, "UnknownLease");

  auto bot = hello({{"type", "hello"}, {"role", "agent"}, {"agentId", "a"}});
  auto bot2 = hello({{"type", "hello"}, {"role", "agent"}, {"agentId", "b"}});
  const auto hit = client.post("/comparisons", {{"taskId", "three"}, {"agents", {"a", "b"}}, {"seed", 3}});
  const std::string hit_id = hit.at("hitId");
  const auto view = client.get("/comparisons/" + hit_id + "/participant");
  EXPECT_EQ(view.dump().find("\"a\""), std::string::npos);
  expect_status([&] { client.post("/comparisons/" + hit_id + "/verdict", {{"winner", "Agent 1"}}); }, 409,
                "VerdictNotReady");

  const auto game_id = client.post("/collection/games", {{"taskId", "three"}}).at("gameId");
  const auto turn = client.post("/collection/next", {{"annotatorId", "ann"}});
  EXPECT_EQ(turn.at("gameId"), game_id);
  EXPECT_EQ(turn.at("role"), "architect");
  EXPECT_EQ(client.get("/stats").at("collectionGames"), 1);
}

TEST_F(NetTest, ServesStaticAssets) {
  httplib::Client http("127.0.0.1", admin.port());
  const auto page = http.Get("/index.html");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->status, 200);
  EXPECT_EQ(page->body, "<html>lobby</html>");
  EXPECT_EQ(http.Get("/missing.js")->status, 404);
}

TEST(Net, ConnectionAndBindErrors) {
  server::GameServer game(ServerConfig{}, std::make_shared<MemoryStorage>());
  WireServer taken(game, "127.0.0.1", 0);
  try {
    WireServer clash(game, "127.0.0.1", taken.port());
    FAIL();
  } catch (const NetError& e) {
    EXPECT_EQ(e.kind(), NetError::Kind::BindFailed);
  }
  try {
    AdminServer clash(game, "127.0.0.1", taken.port());
    FAIL();
  } catch (const NetError& e) {
    EXPECT_EQ(e.kind(), NetError::Kind::BindFailed);
  }
  const auto port = taken.port();
  taken.stop();
  try {
    LineStream::connect("127.0.0.1", port);
    FAIL();
  } catch (const NetError& e) {
    EXPECT_EQ(e.kind(), NetError::Kind::ConnectionRefused);
  }
  try {
    AdminClient("127.0.0.1", port).get("/health");
    FAIL();
  } catch (const NetError& e) {
    EXPECT_EQ(e.kind(), NetError::Kind::ConnectionRefused);
  }
}

TEST(Net, HttpStatusMapping) {
  EXPECT_EQ(http_status(server::ServerErrc::UnknownAgent), 404);
  EXPECT_EQ(http_status(server::ServerErrc::VerdictAlreadySubmitted), 409);
  EXPECT_EQ(http_status(server::ServerErrc::LeaseExpired), 410);
  EXPECT_EQ(http_status(server::ServerErrc::RuleViolation), 422);
  EXPECT_EQ(http_status(server::ServerErrc::InvalidCode), 400);
}
