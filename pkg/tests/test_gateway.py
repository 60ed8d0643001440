"""HTTP surface: auth, UI delivery, submissions, alerts, persistence."""

import json

import pytest
from fastapi.testclient import TestClient

from medforge.auth import Credentials, make_credential_line, parse_credentials
from medforge.gateway import create_app
from medforge.store import Store
from medforge.template_engine import load_default_templates

TEMPLATES = load_default_templates()


@pytest.fixture(scope="session")
def credential_lines():
    # pbkdf2 is deliberately slow; hash once per session
    return "\n".join([
        make_credential_line("p1", "patient", "secret-1"),
        make_credential_line("p2", "patient", "secret-2"),
        make_credential_line("d1", "doctor", "doc-pass"),
        make_credential_line("p1", "patient", "device-key"),  # acquisition device
    ])


@pytest.fixture()
def env(tmp_path, figure4_profile, credential_lines):
    store = Store(tmp_path / "data")
    store.store_profile("p1", figure4_profile, expected_version=0)
    credentials = Credentials(parse_credentials(credential_lines))
    app = create_app(store, TEMPLATES, credentials)
    client = TestClient(app, raise_server_exceptions=False)
    yield {"client": client, "store": store, "tmp": tmp_path,
           "credentials": credentials}
    store.close()


def login(client, principal, password):
    response = client.post("/api/login",
                           json={"principal": principal, "password": password})
    assert response.status_code == 200, response.text
    return {"Authorization": f"Bearer {response.json()['token']}"}


def good_submission(**overrides):
    body = {
        "patient_id": "p1",
        "period": "morning",
        "client_timestamp": "2026-08-10T08:00:00Z",
        "values": {
            "00215062000112time": "08:00",
            "00215062000112sys": "12",
            "00215062000112dia": "8",
        },
    }
    body.update(overrides)
    return body


class TestLogin:
    def test_valid_patient_login_grants_own_ui(self, env):
        headers = login(env["client"], "p1", "secret-1")
        response = env["client"].get("/api/patients/p1/ui", headers=headers)
        assert response.status_code == 200

    def test_wrong_password_and_unknown_principal_indistinguishable(self, env):
        wrong = env["client"].post("/api/login",
                                   json={"principal": "p1", "password": "nope"})
        unknown = env["client"].post("/api/login",
                                     json={"principal": "ghost", "password": "nope"})
        assert wrong.status_code == unknown.status_code == 401
        assert wrong.json() == unknown.json()

    def test_device_credential_shares_patient_principal(self, env):
        headers = login(env["client"], "p1", "device-key")
        response = env["client"].get("/api/patients/p1/ui", headers=headers)
        assert response.status_code == 200

    def test_malformed_login_body(self, env):
        assert env["client"].post("/api/login", content=b"{oops").status_code == 400
        assert env["client"].post("/api/login", json={"principal": "p1"}).status_code == 400


class TestAuthorizationMatrix:
    CASES = [
        # (method, path, body, patient_own, patient_other, doctor, anon)
        ("GET", "/api/patients/{pid}/profile", None, 200, 403, 200, 401),
        ("PUT", "/api/patients/{pid}/profile", b"<profile/>", 403, 403, 422, 401),
        ("GET", "/api/patients/{pid}/ui", None, 200, 403, 200, 401),
        ("POST", "/api/patients/{pid}/submissions", b"{}", 400, 403, 400, 401),
        ("GET", "/api/patients/{pid}/records", None, 200, 403, 200, 401),
        ("GET", "/api/alerts", None, 403, 403, 200, 401),
        ("POST", "/api/alerts/1/ack", None, 403, 403, 404, 401),
    ]

    def test_every_role_endpoint_pair_defined(self, env):
        client = env["client"]
        own = login(client, "p1", "secret-1")
        other = login(client, "p2", "secret-2")
        doctor = login(client, "d1", "doc-pass")
        for method, path, body, expect_own, expect_other, expect_doc, expect_anon \
                in self.CASES:
            url = path.format(pid="p1")
            for headers, expected in ((own, expect_own), (other, expect_other),
                                      (doctor, expect_doc), ({}, expect_anon)):
                response = client.request(method, url, headers=headers, content=body)
                assert response.status_code == expected, (
                    f"{method} {url} headers={bool(headers)} -> "
                    f"{response.status_code}, wanted {expected}")

    def test_expired_token_rejected(self, tmp_path, figure4_profile,
                                    credential_lines):
        store = Store(tmp_path / "d2")
        store.store_profile("p1", figure4_profile, expected_version=0)
        app = create_app(store, TEMPLATES,
                         Credentials(parse_credentials(credential_lines)),
                         session_ttl=-1)
        client = TestClient(app)
        token = client.post("/api/login", json={
            "principal": "p1", "password": "secret-1"}).json()["token"]
        response = client.get("/api/patients/p1/ui",
                              headers={"Authorization": f"Bearer {token}"})
        assert response.status_code == 401
        store.close()


class TestGetUi:
    def test_uiml_equals_golden_compile(self, env, fixture_path):
        headers = login(env["client"], "p1", "secret-1")
        response = env["client"].get("/api/patients/p1/ui?format=uiml",
                                     headers=headers)
        assert response.status_code == 200
        golden = (fixture_path / "bp.golden.uiml").read_bytes()
        assert response.content == golden
        assert response.headers["X-Profile-Version"] == "1"

    def test_widget_json_carries_bounds(self, env):
        headers = login(env["client"], "p1", "secret-1")
        response = env["client"].get("/api/patients/p1/ui?format=widget-json",
                                     headers=headers)
        tree = response.json()
        inputs = []

        def walk(node):
            if "input" in node:
                inputs.append(node["input"])
            for child in node["children"]:
                walk(child)

        for root in tree["roots"]:
            walk(root)
        assert len(inputs) == 3
        sys_input = next(i for i in inputs if i["value_id"] == "00215062000112sys")
        assert sys_input["datatype"] == "integer"
        assert sys_input["max"] == 23

    def test_unknown_format(self, env):
        headers = login(env["client"], "p1", "secret-1")
        response = env["client"].get("/api/patients/p1/ui?format=pdf",
                                     headers=headers)
        assert response.status_code == 400

    def test_no_profile_404(self, env):
        headers = login(env["client"], "p2", "secret-2")
        assert env["client"].get("/api/patients/p2/ui",
                                 headers=headers).status_code == 404


class TestSubmissions:
    def test_clean_submission_accepted_and_listed(self, env):
        client = env["client"]
        headers = login(client, "p1", "secret-1")
        response = client.post("/api/patients/p1/submissions", headers=headers,
                               json=good_submission())
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "accepted"
        assert body["record_id"] == 1
        assert body["alerts"] == []
        records = client.get("/api/patients/p1/records", headers=headers).json()
        assert [r["record_id"] for r in records["records"]] == [1]
        assert records["records"][0]["values"]["00215062000112sys"]["value"] == 12

    def test_out_of_range_accepted_with_alert(self, env):
        client = env["client"]
        headers = login(client, "p1", "secret-1")
        response = client.post(
            "/api/patients/p1/submissions", headers=headers,
            json=good_submission(values={
                "00215062000112time": "08:00",
                "00215062000112sys": "24",
                "00215062000112dia": "8",
            }))
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "accepted"
        assert len(body["alerts"]) == 1
        assert body["alerts"][0]["kind"] == "bound_max"
        doctor = login(client, "d1", "doc-pass")
        feed = client.get("/api/alerts", headers=doctor).json()["alerts"]
        assert [a["alert_id"] for a in feed] == [body["alerts"][0]["alert_id"]]

    def test_relation_violation_rejected_422(self, env):
        client = env["client"]
        headers = login(client, "p1", "secret-1")
        response = client.post(
            "/api/patients/p1/submissions", headers=headers,
            json=good_submission(values={
                "00215062000112time": "08:00",
                "00215062000112sys": "12",
                "00215062000112dia": "15",
            }))
        assert response.status_code == 422
        assert response.json()["rejections"][0]["code"] == "RELATION_VIOLATION"

    def test_malformed_json_400(self, env):
        headers = login(env["client"], "p1", "secret-1")
        response = env["client"].post("/api/patients/p1/submissions",
                                      headers=headers, content=b"{nope")
        assert response.status_code == 400

    def test_bad_period_400(self, env):
        headers = login(env["client"], "p1", "secret-1")
        response = env["client"].post("/api/patients/p1/submissions",
                                      headers=headers,
                                      json=good_submission(period="brunch"))
        assert response.status_code == 400

    def test_body_patient_must_match_url(self, env):
        headers = login(env["client"], "p1", "secret-1")
        response = env["client"].post("/api/patients/p1/submissions",
                                      headers=headers,
                                      json=good_submission(patient_id="p9"))
        assert response.status_code == 400

    def test_nonce_replay_returns_original_response(self, env):
        client = env["client"]
        headers = login(client, "p1", "secret-1")
        body = good_submission(submission_nonce="nonce-001")
        first = client.post("/api/patients/p1/submissions", headers=headers,
                            json=body)
        replay = client.post("/api/patients/p1/submissions", headers=headers,
                             json=body)
        assert first.status_code == replay.status_code == 200
        assert first.json() == replay.json()
        records = client.get("/api/patients/p1/records", headers=headers).json()
        assert len(records["records"]) == 1  # no duplicate

    def test_version_skew_409(self, env):
        headers = login(env["client"], "p1", "secret-1")
        response = env["client"].post(
            "/api/patients/p1/submissions", headers=headers,
            json=good_submission(profile_version=99))
        assert response.status_code == 409
        assert response.json()["current_version"] == 1

    def test_records_since_filter(self, env):
        client = env["client"]
        headers = login(client, "p1", "secret-1")
        client.post("/api/patients/p1/submissions", headers=headers,
                    json=good_submission())
        first_stamp = client.get("/api/patients/p1/records",
                                 headers=headers).json()["records"][0][
                                     "server_timestamp"]
        client.post("/api/patients/p1/submissions", headers=headers,
                    json=good_submission(period="noon"))
        all_records = client.get("/api/patients/p1/records",
                                 headers=headers).json()["records"]
        assert len(all_records) == 2
        later = [r for r in all_records if r["server_timestamp"] > first_stamp]
        since = client.get(
            f"/api/patients/p1/records?since={all_records[1]['server_timestamp']}",
            headers=headers).json()["records"]
        assert [r["record_id"] for r in since] == [r["record_id"] for r in
                                                   all_records[1:]]
        assert len(later) <= len(since)


class TestProfileUpdate:
    WEIGHT_MEDCOMP = """
      <medComp id="w1"><name>Body Weight</name>
        <value id="w1kg" datatype="decimal">
          <descrip type="medical" class="clinical">kilograms</descrip>
        </value>
        <peers>
          <retrieve idref="w1kg" type="bsnQuery"><method><name>bsnQuery</name>
            <param datatype="char" name="Weight"/>
            <return datatype="decimal"/></method></retrieve>
        </peers>
      </medComp>
    """

    def test_doctor_update_changes_compiled_ui(self, env, figure4_xml):
        client = env["client"]
        doctor = login(client, "d1", "doc-pass")
        updated = figure4_xml.replace("</profile>",
                                      self.WEIGHT_MEDCOMP + "</profile>")
        response = client.put("/api/patients/p1/profile?expected_version=1",
                              headers=doctor, content=updated.encode())
        assert response.status_code == 200
        assert response.json()["version"] == 2

        patient = login(client, "p1", "secret-1")
        ui = client.get("/api/patients/p1/ui", headers=patient)
        assert ui.headers["X-Profile-Version"] == "2"
        assert b'name="BWPanel"' in ui.content

    def test_version_conflict_409(self, env, figure4_xml):
        doctor = login(env["client"], "d1", "doc-pass")
        response = env["client"].put(
            "/api/patients/p1/profile?expected_version=0",
            headers=doctor, content=figure4_xml.encode())
        assert response.status_code == 409

    def test_dangling_relation_422(self, env):
        doctor = login(env["client"], "d1", "doc-pass")
        xml = ('<profile patient="p1">'
               '<relation op="lt" left="ghost" right="ghost2"/></profile>')
        response = env["client"].put("/api/patients/p1/profile?expected_version=1",
                                     headers=doctor, content=xml.encode())
        assert response.status_code == 422
        codes = [d["code"] for d in response.json()["diagnostics"]]
        assert "DANGLING_IDREF" in codes

    def test_malformed_xml_422(self, env):
        doctor = login(env["client"], "d1", "doc-pass")
        response = env["client"].put("/api/patients/p1/profile?expected_version=1",
                                     headers=doctor, content=b"<profile")
        assert response.status_code == 422
        assert response.json()["diagnostics"][0]["code"] == "XML_SYNTAX"

    def test_wrong_patient_attribute_422(self, env, figure4_xml):
        doctor = login(env["client"], "d1", "doc-pass")
        response = env["client"].put("/api/patients/p2/profile?expected_version=0",
                                     headers=doctor, content=figure4_xml.encode())
        assert response.status_code == 422
        assert response.json()["diagnostics"][0]["code"] == "PATIENT_MISMATCH"


class TestAlertWorkflow:
    def test_ack_marks_alert(self, env):
        client = env["client"]
        patient = login(client, "p1", "secret-1")
        client.post("/api/patients/p1/submissions", headers=patient,
                    json=good_submission(values={
                        "00215062000112time": "08:00",
                        "00215062000112sys": "30",
                        "00215062000112dia": "8",
                    }))
        doctor = login(client, "d1", "doc-pass")
        alert_id = client.get("/api/alerts",
                              headers=doctor).json()["alerts"][0]["alert_id"]
        ack = client.post(f"/api/alerts/{alert_id}/ack", headers=doctor)
        assert ack.status_code == 200
        assert ack.json()["alert"]["acknowledged"] is True
        remaining = client.get("/api/alerts?unacknowledged_only=true",
                               headers=doctor).json()["alerts"]
        assert remaining == []


class TestStatelessAboveStore:
    def test_restart_keeps_data_invalidates_sessions(self, tmp_path,
                                                     figure4_profile,
                                                     credential_lines):
        credentials = Credentials(parse_credentials(credential_lines))
        store = Store(tmp_path / "data")
        store.store_profile("p1", figure4_profile, expected_version=0)
        client = TestClient(create_app(store, TEMPLATES, credentials))
        headers = login(client, "p1", "secret-1")
        assert client.post("/api/patients/p1/submissions", headers=headers,
                           json=good_submission()).status_code == 200
        store.close()

        # simulated restart: fresh store over the same files, fresh app
        store2 = Store(tmp_path / "data")
        client2 = TestClient(create_app(store2, TEMPLATES, credentials))
        assert client2.get("/api/patients/p1/records",
                           headers=headers).status_code == 401  # session gone
        headers2 = login(client2, "p1", "secret-1")
        records = client2.get("/api/patients/p1/records",
                              headers=headers2).json()["records"]
        assert [r["record_id"] for r in records] == [1]
        store2.close()
