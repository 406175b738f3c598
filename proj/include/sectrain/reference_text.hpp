#pragma once

#include <string_view>

// Training text for the built-in character models. Written for this project;
// plain security-operations English plus short samples for a few other
// languages so the language identifier has something to contrast against.

namespace sectrain::reference {

inline constexpr std::string_view kEnglish = R"(
A vulnerability is a weakness in software, firmware, or hardware that an attacker can use to
change the behavior of a system. Security teams track each public vulnerability with an identifier,
a short description of the affected product, and a severity rating. The description usually names
the component, the version range that is affected, and the kind of flaw, such as a buffer overflow,
a use after free, an injection bug, or a missing authorization check.

When a new advisory is published, analysts read the description and decide which weakness class it
belongs to. Cross-site scripting, SQL injection, path traversal, and improper input validation are
among the most common classes. The mapping from a vulnerability to its weakness class helps defenders
find related problems in their own code and plan fixes that remove the whole class of bugs instead of
one instance.

Severity is described with a vector of base metrics. The attack vector says whether the attacker needs
network access, access to an adjacent network, local access, or physical access. The attack complexity
says whether the attack works reliably or depends on conditions outside the attacker's control. The
privileges required and the user interaction metrics describe what the attacker needs before the attack
starts. The scope metric records whether the impact crosses a security boundary, and the last three
metrics describe the impact on confidentiality, integrity, and availability.

Threat intelligence reports describe how real intrusions happened. A typical report explains how the
attacker gained initial access, for example through a phishing email with a malicious attachment or
through an exposed remote service. It then describes execution of a script or a command interpreter,
persistence through scheduled tasks or registry run keys, privilege escalation, credential dumping,
lateral movement to other hosts, and finally collection and exfiltration of data. Each of these steps
maps to a technique in a shared knowledge base of adversary behavior, which lets defenders compare
campaigns and build detections for the behavior rather than for a single file hash.

Incident responders work with logs from many sources. Web server logs show the requests that reached
an application, authentication logs show successful and failed logins, and endpoint telemetry shows
process creation, network connections, and file changes. A good investigation starts with a clear
timeline. The responder collects the relevant events, removes noise, and connects each event to the
host, the user, and the process that produced it. Once the timeline is complete, the team can decide
how to contain the incident, remove the attacker, and restore normal operation.

Secure code review looks for the places where untrusted data enters a program and follows that data
until it reaches a sensitive operation. If the data reaches a database query, a shell command, a file
path, or an HTML page without validation or encoding, the reviewer reports a potential vulnerability
and proposes a fix. Memory safety bugs need a different approach: the reviewer checks buffer sizes,
integer arithmetic on lengths, object lifetimes, and error paths where a resource may be released twice.

Detection engineering turns knowledge about attacks into rules that run on real data. A rule should be
specific enough to avoid a flood of false positives, but general enough that a small change by the
attacker does not bypass it. Teams test their rules against recorded attack traffic and benign traffic,
measure precision and recall, and keep the rules under version control so that every change can be
reviewed. Over time the rule set becomes a record of what the organization has learned about the
threats it faces.
)";

inline constexpr std::string_view kGerman = R"(
Eine Schwachstelle ist ein Fehler in einer Software, den ein Angreifer ausnutzen kann, um das Verhalten
eines Systems zu veraendern. Sicherheitsteams verfolgen jede bekannte Schwachstelle mit einer Kennung und
einer kurzen Beschreibung des betroffenen Produkts. Die Beschreibung nennt die Komponente, die betroffenen
Versionen und die Art des Fehlers. Bei einem Vorfall sammeln die Analysten zuerst alle relevanten Ereignisse
und erstellen daraus eine Zeitleiste, damit sie die Ursache finden und den Angreifer aus dem Netzwerk
entfernen koennen. Danach werden die Systeme wiederhergestellt und die Erkenntnisse dokumentiert.
)";

inline constexpr std::string_view kFrench = R"(
Une vulnerabilite est une faiblesse dans un logiciel qu'un attaquant peut exploiter pour modifier le
comportement d'un systeme. Les equipes de securite suivent chaque vulnerabilite publique avec un identifiant
et une courte description du produit concerne. La description indique le composant, les versions touchees
et le type de defaut. Lors d'un incident, les analystes rassemblent les evenements utiles et construisent une
chronologie afin de trouver la cause, de contenir l'attaque et de retablir le fonctionnement normal des
services. Les lecons apprises sont ensuite partagees avec les autres equipes.
)";

inline constexpr std::string_view kSpanish = R"(
Una vulnerabilidad es una debilidad en un programa que un atacante puede aprovechar para cambiar el
comportamiento de un sistema. Los equipos de seguridad siguen cada vulnerabilidad publica con un
identificador y una breve descripcion del producto afectado. La descripcion indica el componente, las
versiones afectadas y el tipo de fallo. Durante un incidente, los analistas reunen los eventos relevantes y
construyen una cronologia para encontrar la causa, contener el ataque y restaurar el funcionamiento normal
de los servicios. Despues se documentan las lecciones aprendidas para todo el equipo.
)";

}  // namespace sectrain::reference
