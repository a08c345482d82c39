#include "ymap/coco.hpp"

namespace ymap {

// Keep in sync with data/class_groups.txt (checked by test_coco).
std::string_view default_class_group_text() {
  return R"TABLE(# Default COCO category -> class group table.
# One line per category id (1..183, COCO-Stuff 2017 ids including the 11
# thing ids unused by the 2017 release). Columns: id, name, group.
# Groups: Persons Vehicles Animals Objects Furniture Appliances Materials
#         Obstacles Building Nature Text
# Pass an edited copy with --groups to substitute another grouping.
1	person	Persons
2	bicycle	Vehicles
3	car	Vehicles
4	motorcycle	Vehicles
5	airplane	Vehicles
6	bus	Vehicles
7	train	Vehicles
8	truck	Vehicles
9	boat	Vehicles
10	traffic_light	Obstacles
11	fire_hydrant	Obstacles
12	street_sign	Obstacles
13	stop_sign	Obstacles
14	parking_meter	Obstacles
15	bench	Furniture
16	bird	Animals
17	cat	Animals
18	dog	Animals
19	horse	Animals
20	sheep	Animals
21	cow	Animals
22	elephant	Animals
23	bear	Animals
24	zebra	Animals
25	giraffe	Animals
26	hat	Objects
27	backpack	Objects
28	umbrella	Objects
29	shoe	Objects
30	eye_glasses	Objects
31	handbag	Objects
32	tie	Objects
33	suitcase	Objects
34	frisbee	Objects
35	skis	Objects
36	snowboard	Objects
37	sports_ball	Objects
38	kite	Objects
39	baseball_bat	Objects
40	baseball_glove	Objects
41	skateboard	Objects
42	surfboard	Objects
43	tennis_racket	Objects
44	bottle	Objects
45	plate	Objects
46	wine_glass	Objects
47	cup	Objects
48	fork	Objects
49	knife	Objects
50	spoon	Objects
51	bowl	Objects
52	banana	Objects
53	apple	Objects
54	sandwich	Objects
55	orange	Objects
56	broccoli	Objects
57	carrot	Objects
58	hot_dog	Objects
59	pizza	Objects
60	donut	Objects
61	cake	Objects
62	chair	Furniture
63	couch	Furniture
64	potted_plant	Nature
65	bed	Furniture
66	mirror	Furniture
67	dining_table	Furniture
68	window	Building
69	desk	Furniture
70	toilet	Appliances
71	door	Building
72	tv	Appliances
73	laptop	Objects
74	mouse	Objects
75	remote	Objects
76	keyboard	Objects
77	cell_phone	Objects
78	microwave	Appliances
79	oven	Appliances
80	toaster	Appliances
81	sink	Appliances
82	refrigerator	Appliances
83	blender	Appliances
84	book	Objects
85	clock	Objects
86	vase	Objects
87	scissors	Objects
88	teddy_bear	Objects
89	hair_drier	Appliances
90	toothbrush	Objects
91	hair_brush	Objects
92	banner	Text
93	blanket	Materials
94	branch	Nature
95	bridge	Building
96	building-other	Building
97	bush	Nature
98	cabinet	Furniture
99	cage	Obstacles
100	cardboard	Materials
101	carpet	Materials
102	ceiling-other	Building
103	ceiling-tile	Building
104	cloth	Materials
105	clothes	Materials
106	clouds	Nature
107	counter	Furniture
108	cupboard	Furniture
109	curtain	Materials
110	desk-stuff	Furniture
111	dirt	Nature
112	door-stuff	Building
113	fence	Obstacles
114	floor-marble	Building
115	floor-other	Building
116	floor-stone	Building
117	floor-tile	Building
118	floor-wood	Building
119	flower	Nature
120	fog	Nature
121	food-other	Objects
122	fruit	Objects
123	furniture-other	Furniture
124	grass	Nature
125	gravel	Nature
126	ground-other	Nature
127	hill	Nature
128	house	Building
129	leaves	Nature
130	light	Appliances
131	mat	Materials
132	metal	Materials
133	mirror-stuff	Furniture
134	moss	Nature
135	mountain	Nature
136	mud	Nature
137	napkin	Materials
138	net	Obstacles
139	paper	Materials
140	pavement	Building
141	pillow	Furniture
142	plant-other	Nature
143	plastic	Materials
144	platform	Building
145	playingfield	Nature
146	railing	Obstacles
147	railroad	Building
148	river	Nature
149	road	Building
150	rock	Nature
151	roof	Building
152	rug	Materials
153	salad	Objects
154	sand	Nature
155	sea	Nature
156	shelf	Furniture
157	sky-other	Nature
158	skyscraper	Building
159	snow	Nature
160	solid-other	Materials
161	stairs	Building
162	stone	Materials
163	straw	Materials
164	structural-other	Building
165	table	Furniture
166	tent	Building
167	textile-other	Materials
168	towel	Materials
169	tree	Nature
170	vegetable	Objects
171	wall-brick	Building
172	wall-concrete	Building
173	wall-other	Building
174	wall-panel	Building
175	wall-stone	Building
176	wall-tile	Building
177	wall-wood	Building
178	water-other	Nature
179	waterdrops	Nature
180	window-blind	Building
181	window-other	Building
182	wood	Materials
183	other	Objects
)TABLE";
}

}  // namespace ymap
