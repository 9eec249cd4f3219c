#include "oracles.hpp"

#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>

using nlohmann::json;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args)
{
    const char* bin = std::getenv("PERSONABLE_CLI");
    REQUIRE(bin != nullptr);
    const std::string cmd = std::string(bin) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    Run r;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0)
        r.out.append(buf.data(), n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string data(const char* name)
{
    return "'" + oracle::data_path(name).string() + "'";
}

} // namespace

TEST_CASE("ingest reports depth and leaves")
{
    const Run r = run("ingest " + data("camera.site") + " --json");
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j["site"] == "camera");
    CHECK(j["depth"] == 2);
    CHECK(j["leaves"] == 7);
    CHECK(j["report"].empty());
}

TEST_CASE("specialize by free-text terms")
{
    const Run r = run("specialize --site " + data("camera.site") + " --terms SLR --json");
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j["kind"] == "partial");
    CHECK(j["program"]["edges"].size() == 2);
    const auto eliminated = j["eliminated"].get<std::vector<std::string>>();
    CHECK(std::find(eliminated.begin(), eliminated.end(), "canon") != eliminated.end());

    const Run done = run("specialize --site " + data("camera.site") + " --assign maker=Nikon type=SLR --json");
    REQUIRE(done.code == 0);
    CHECK(json::parse(done.out)["kind"] == "complete");

    CHECK(run("specialize --site " + data("camera.site") + " --terms APS --assign type=SLR").code == 1);
}

TEST_CASE("analyze the camera shoppers")
{
    const Run r = run("analyze --site " + data("camera.site") + " --activities " + data("camera.activities") + " --json");
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j["frozen"]["frozen"] == false);
    CHECK(j["audience"]["rows"].size() == 5);

    const Run frozen = run("analyze --site " + data("frozen.site"));
    REQUIRE(frozen.code == 0);
    CHECK(frozen.out.find("frozen: yes") != std::string::npos);
}

TEST_CASE("derive templates from the reference trace")
{
    const Run r = run("derive-templates --theory " + data("bookstore.theory") + " --traces " + data("linus.trace") +
                      " --site " + data("bookstore.site") + " --top-k 3");
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    REQUIRE(j["templates"].size() >= 3);
    CHECK(j["templates"][0]["name"] == "user:linus/book=John Nash,category=Science,payment=Discover,shipping=Fedex");
    CHECK(j["templates"][0]["savings"] == 4.0);
    CHECK(j["skipped"].empty());
}

TEST_CASE("usage errors exit nonzero")
{
    CHECK(run("").code != 0);
    CHECK(run("ingest /no/such/file.site").code != 0);
    CHECK(run("specialize").code != 0);
}
